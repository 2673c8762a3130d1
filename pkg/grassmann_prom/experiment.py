"""
Offline and online phases of an experiment

Offline: simulate the HFM at every training point, then build one region model
(and hyper mesh) per subdomain plus the domain-wide basis. Online: serve every
query point with each requested variant, integrate the reduced system and
compare it against a cached HFM run.

Every stage is keyed by a hash of the inputs it is computed from; a rerun with
an unchanged configuration recomputes nothing.

Output layout:

    manifest.json          file hashes and completed stages
    snapshots/<key>*       HFM training runs
    regions/sub_XXX/       one region model per subdomain
    global/                domain-wide basis (and hyper mesh)
    truth/<key>*           HFM runs at query points
    online.csv             deterministic comparison rows
    timing.csv             wall times and speed-ups
    summary/               aggregated tables written by `report`
"""
import json
import logging
import statistics
from concurrent.futures import ProcessPoolExecutor
from io import BytesIO, StringIO
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import attr
import numpy as np
import pandas as pd

from . import ecsw, fem, prom
from .config import ExperimentConfig
from .errors import ArtifactError, NumericalError
from .metrics import ComparisonReport, compare, speedup, summarize
from .newmark import FullOrderSystem, integrate, integrate_reduced
from .param_space import (
    ParameterGrid,
    ParameterPoint,
    Subdomain,
    sample_domain,
    validation_points,
)
from .pod import SnapshotSet
from .scenario import Scenario
from .storage import (
    ArtifactStore,
    content_key,
    load_basis,
    load_region,
    load_snapshot,
    save_basis,
    save_region,
    save_snapshot,
)

logger = logging.getLogger(__name__)

ONLINE_CSV = 'online.csv'
ONLINE_META = 'online.json'
TIMING_CSV = 'timing.csv'
SUMMARY_DIR = 'summary'
FLOAT_FORMAT = '%.12e'


@attr.s
class Simulation:
    """HFM response at one parameter point

    Args:
        point: parameter point
        displacements: T x n displacement history, row 0 at rest
        link_forces: T x n_e link force history
        stats: integrator statistics
    """

    point: ParameterPoint = attr.ib()
    displacements: np.ndarray = attr.ib(repr=False)
    link_forces: np.ndarray = attr.ib(repr=False)
    stats: dict = attr.ib(factory=dict)

    @property
    def wall_time_s(self) -> float:
        return self.stats['wall_time_s']

    def snapshot(self) -> SnapshotSet:
        return SnapshotSet(self.point, self.displacements.T, self.link_forces)


@attr.s
class OfflineSummary:
    simulated: int = attr.ib(default=0)
    reused: int = attr.ib(default=0)
    built: int = attr.ib(default=0)
    current: int = attr.ib(default=0)


def simulate(cfg: ExperimentConfig, point: ParameterPoint) -> Simulation:
    """Run the HFM at `point`"""
    model, loads = Scenario(cfg).build(point)
    history = integrate(
        FullOrderSystem(model, cfg.model.link_substeps), loads, cfg.integrator
    )
    forces = fem.link_forces(model, history.internal_states)
    return Simulation(point, history.displacements, forces, history.stats())


def _simulate_job(cfg: ExperimentConfig, coords: Tuple[float, ...]) -> Simulation:
    point = ParameterPoint(coords)
    try:
        return simulate(cfg, point)
    except NumericalError as err:
        # Plain message: the subclass signatures do not survive pickling
        raise NumericalError(f'HFM simulation at {point.coords} failed: {err}')


def simulate_all(
    cfg: ExperimentConfig, points: Sequence[ParameterPoint]
) -> List[Simulation]:
    """Simulate independent points, in a process pool when `cfg.workers > 1`

    Results come back in the order of `points`.
    """
    points = list(points)
    if cfg.workers > 1 and len(points) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_simulate_job, cfg, p.coords) for p in points]
            return [f.result() for f in futures]
    return [_simulate_job(cfg, p.coords) for p in points]


def _hfm_inputs(cfg: ExperimentConfig) -> dict:
    return {
        'model': attr.asdict(cfg.model),
        'load': attr.asdict(cfg.load),
        'integrator': attr.asdict(cfg.integrator),
        'axes': list(cfg.grid.domain.names),
        'seed': cfg.seed,
    }


def point_key(cfg: ExperimentConfig, point: ParameterPoint) -> str:
    """Content key of the HFM run at `point`"""
    coords = [repr(c) for c in point.coords]
    return content_key({'hfm': _hfm_inputs(cfg), 'point': coords})


def _snapshot_prefix(key: str) -> str:
    return f'snapshots/{key[:16]}'


def _truth_prefix(key: str) -> str:
    return f'truth/{key[:16]}'


def _region_prefix(sub: Subdomain) -> str:
    return f'regions/{sub.label()}'


class Experiment:
    """Binds a configuration to its output directory"""

    def __init__(self, cfg: ExperimentConfig, store: Optional[ArtifactStore] = None):
        self.cfg = cfg
        self.store = store or ArtifactStore(cfg.output)
        self.scenario = Scenario(cfg)
        self.grid: ParameterGrid = cfg.grid.partition()
        self.names = self.grid.domain.names
        self._regions: Dict[int, prom.RegionModel] = {}
        self._global: Optional[prom.GlobalModel] = None
        self._global_mesh: Optional[ecsw.HyperMesh] = None

    # Stage keys

    def training_keys(self, sub: Subdomain) -> List[str]:
        points = [self.grid.canonical(p) for p in sub.training_points]
        return [point_key(self.cfg, p) for p in points]

    def region_key(self, sub: Subdomain) -> str:
        cfg = self.cfg
        return content_key(
            {
                'snapshots': self.training_keys(sub),
                'r_local': cfg.reduction.r_local,
                'r_global': cfg.reduction.r_global,
                'ecsw': attr.asdict(cfg.ecsw) if cfg.ecsw.enabled else None,
            }
        )

    def global_key(self) -> str:
        cfg = self.cfg
        keys = [point_key(cfg, p) for p in self.grid.training_points()]
        return content_key(
            {
                'snapshots': keys,
                'r_local': cfg.reduction.r_local,
                'ecsw': attr.asdict(cfg.ecsw) if cfg.ecsw.enabled else None,
            }
        )

    @property
    def needs_global(self) -> bool:
        return 'global' in self.cfg.reduction.variants

    @property
    def needs_regions(self) -> bool:
        return any(v != 'global' for v in self.cfg.reduction.variants)

    # Offline

    def run_offline(self) -> OfflineSummary:
        summary = OfflineSummary()
        self._simulate_training(summary)

        if self.needs_regions:
            for sub in self.grid.subdomains:
                self._build_region(sub, summary)
        if self.needs_global:
            self._build_global(summary)

        self.store.save_manifest()
        logger.info(
            'offline phase done: %d simulated, %d reused, %d models built, '
            '%d up to date',
            summary.simulated,
            summary.reused,
            summary.built,
            summary.current,
        )
        return summary

    def _simulate_training(self, summary: OfflineSummary) -> None:
        pending = []
        for point in self.grid.training_points():
            key = point_key(self.cfg, point)
            if self.store.is_current(f'snapshot:{key[:16]}', key):
                summary.reused += 1
                continue
            pending.append((key, point))

        logger.info(
            'simulating %d of %d training points',
            len(pending),
            len(pending) + summary.reused,
        )
        results = simulate_all(self.cfg, [p for _, p in pending])
        for (key, point), sim in zip(pending, results):
            prefix = _snapshot_prefix(key)
            files = save_snapshot(self.store, prefix, sim.snapshot())
            self.store.write_json(f'{prefix}_stats.json', sim.stats)
            files.append(f'{prefix}_stats.json')
            self.store.mark(f'snapshot:{key[:16]}', key, files)
            summary.simulated += 1

    def load_training(self, sub: Subdomain) -> List[SnapshotSet]:
        try:
            return [
                load_snapshot(self.store, _snapshot_prefix(k))
                for k in self.training_keys(sub)
            ]
        except ArtifactError as err:
            raise ArtifactError(
                f'training snapshots of {sub.label()} unavailable ({err}); '
                'run the offline phase first'
            ) from err

    def _train_mesh(
        self, snapshots: Sequence[SnapshotSet], basis, model: fem.StructuralModel
    ) -> ecsw.HyperMesh:
        training = ecsw.assemble_training(
            snapshots, basis, model, stride=self.cfg.ecsw.stride, tau=self.cfg.ecsw.tau
        )
        return ecsw.solve_sparse_nnls(training)

    def _build_region(self, sub: Subdomain, summary: OfflineSummary) -> None:
        key = self.region_key(sub)
        stage = f'region:{sub.label()}'
        if self.store.is_current(stage, key):
            logger.info('%s is up to date', sub.label())
            summary.current += 1
            return

        snapshots = self.load_training(sub)
        reduction = self.cfg.reduction
        region = prom.build_region(
            sub, snapshots, reduction.r_local, reduction.r_global
        )
        if self.cfg.ecsw.enabled:
            # Element topology does not depend on the parameters
            model = self.scenario.model(sub.centroid)
            region.hyper_mesh = self._train_mesh(
                snapshots, region.reference_basis, model
            )

        files = save_region(self.store, _region_prefix(sub), region)
        self.store.mark(stage, key, files)
        self._regions[sub.index] = region
        summary.built += 1

    def _build_global(self, summary: OfflineSummary) -> None:
        key = self.global_key()
        if self.store.is_current('global', key):
            logger.info('global basis is up to date')
            summary.current += 1
            return

        snapshots = [
            load_snapshot(self.store, _snapshot_prefix(point_key(self.cfg, p)))
            for p in self.grid.training_points()
        ]
        model = prom.build_global(snapshots, self.cfg.reduction.r_local)
        files = save_basis(self.store, 'global/basis', model.basis)
        if self.cfg.ecsw.enabled:
            full = self.scenario.model(snapshots[0].parameter_point)
            mesh = self._train_mesh(snapshots, model.basis, full)
            self.store.write_json('global/mesh.json', mesh.to_dict())
            files.append('global/mesh.json')
            self._global_mesh = mesh
        self.store.mark('global', key, files)
        self._global = model
        summary.built += 1

    # Online

    def region(self, sub: Subdomain) -> prom.RegionModel:
        if sub.index not in self._regions:
            if not self.store.is_current(f'region:{sub.label()}', self.region_key(sub)):
                raise ArtifactError(
                    f'region model {sub.label()} is missing or stale; '
                    'run the offline phase first'
                )
            self._regions[sub.index] = load_region(self.store, _region_prefix(sub), sub)
        return self._regions[sub.index]

    def global_model(self) -> prom.GlobalModel:
        if self._global is None:
            if not self.store.is_current('global', self.global_key()):
                raise ArtifactError(
                    'global basis is missing or stale; run the offline phase '
                    'with the global variant first'
                )
            self._global = prom.GlobalModel(load_basis(self.store, 'global/basis'))
            if self.cfg.ecsw.enabled:
                data = self.store.read_json('global/mesh.json')
                self._global_mesh = ecsw.HyperMesh.from_dict(data)
        return self._global

    def query_points(
        self, points: Optional[Sequence[Sequence[float]]] = None
    ) -> List[Tuple[Subdomain, ParameterPoint]]:
        """Query points with the subdomain serving each of them

        Validation points stay with the subdomain they were generated for;
        other points go to the subdomain `locate` picks.
        """
        queries = self.cfg.queries
        domain = self.grid.domain
        if points is None and queries.mode == 'validation':
            return [
                (sub, p) for sub in self.grid.subdomains for p in validation_points(sub)
            ]

        if points is None and queries.mode == 'grid':
            candidates = sample_domain(domain, queries.counts)
        else:
            values = queries.points if points is None else points
            candidates = [domain.point(list(p)) for p in values]
        return [(self.grid.locate(p), p) for p in candidates]

    def truth(self, point: ParameterPoint) -> Simulation:
        """HFM run at a query point, cached on disk and shared by all variants"""
        point = self.grid.canonical(point)
        key = point_key(self.cfg, point)
        for stage, prefix in (
            (f'snapshot:{key[:16]}', _snapshot_prefix(key)),
            (f'truth:{key[:16]}', _truth_prefix(key)),
        ):
            if self.store.is_current(stage, key):
                s = load_snapshot(self.store, prefix)
                stats = {}
                if self.store.exists(f'{prefix}_stats.json'):
                    stats = self.store.read_json(f'{prefix}_stats.json')
                return Simulation(point, s.displacements.T, s.link_forces, stats)

        sim = simulate(self.cfg, point)
        prefix = _truth_prefix(key)
        files = save_snapshot(self.store, prefix, sim.snapshot())
        self.store.write_json(f'{prefix}_stats.json', sim.stats)
        self.store.mark(f'truth:{key[:16]}', key, files + [f'{prefix}_stats.json'])
        return sim

    def _mesh(
        self,
        variant: str,
        sub: Subdomain,
        rom: prom.ReducedSystem,
    ) -> ecsw.HyperMesh:
        if variant == 'global':
            self.global_model()
            return self._global_mesh
        if self.cfg.ecsw.scope == 'query':
            return self._train_mesh(self.load_training(sub), rom.basis, rom.model)
        return self.region(sub).hyper_mesh.retarget(rom.basis)

    def _median_wall(self, system, loads) -> float:
        """Discard `warmup` runs, then the median wall time of `repeats` runs"""
        timing = self.cfg.timing
        for _ in range(timing.warmup):
            integrate(system, loads, self.cfg.integrator)
        return statistics.median(
            integrate(system, loads, self.cfg.integrator).wall_time_s
            for _ in range(timing.repeats)
        )

    def evaluate(
        self, sub: Subdomain, point: ParameterPoint
    ) -> List[ComparisonReport]:
        """All requested variants at one query point"""
        cfg = self.cfg
        substeps = cfg.model.link_substeps
        model, loads = self.scenario.build(point)
        truth = self.truth(point)
        hfm_wall = truth.stats.get('wall_time_s')
        if cfg.timing.enabled:
            system = FullOrderSystem(model, substeps)
            hfm_wall = self._median_wall(system, loads)

        reports = []
        for variant in cfg.reduction.variants:
            source = self.global_model() if variant == 'global' else self.region(sub)
            counter = prom.OperationCounter()
            rom = prom.query(
                variant, source, point, model, counter=counter, substeps=substeps
            )
            systems = [(False, rom)]
            if cfg.ecsw.enabled:
                systems.append((True, rom.hyper_reduced(self._mesh(variant, sub, rom))))

            for hyper, system in systems:
                try:
                    history = integrate_reduced(system, loads, cfg.integrator)
                except NumericalError as err:
                    raise NumericalError(
                        f'{variant} model at {point.coords} failed: {err}'
                    ) from err

                rom_wall = history.wall_time_s
                if cfg.timing.enabled:
                    rom_wall = self._median_wall(system, loads)

                u_r = system.expand(history)
                rf_r = fem.replay_link_forces(model, u_r, substeps)
                ratio = None
                if hfm_wall and rom_wall > 0:
                    ratio = speedup(hfm_wall, rom_wall)
                ops = None
                if variant in ('entries', 'coefficients'):
                    ops = counter.interpolation
                reports.append(
                    compare(
                        point,
                        variant,
                        truth.displacements,
                        u_r,
                        truth.link_forces,
                        rf_r,
                        order=system.basis.r,
                        literal_denominator=cfg.literal_denominator,
                        subdomain=sub.index,
                        hyper=hyper,
                        mesh_size=system.mesh.size,
                        n_elements=model.n_elements,
                        hfm_wall_s=hfm_wall,
                        rom_wall_s=rom_wall,
                        speedup=ratio,
                        interpolation_ops=ops,
                    )
                )
        return reports

    def run_online(
        self, points: Optional[Sequence[Sequence[float]]] = None
    ) -> List[ComparisonReport]:
        queries = self.query_points(points)
        logger.info(
            'online phase: %d query points, variants %s',
            len(queries),
            ','.join(self.cfg.reduction.variants),
        )
        reports = []
        for i, (sub, point) in enumerate(queries):
            logger.info(
                'query %d/%d at %s (%s)', i + 1, len(queries), point.coords, sub.label()
            )
            reports.extend(self.evaluate(sub, point))

        self.write_reports(reports)
        return reports

    def write_reports(self, reports: Sequence[ComparisonReport]) -> None:
        rows = pd.DataFrame([r.row(self.names) for r in reports])
        rows.insert(0, 'partition', self.cfg.name)
        timing = pd.DataFrame([r.timing_row(self.names) for r in reports])
        timing.insert(0, 'partition', self.cfg.name)

        self.store.write_bytes(ONLINE_CSV, _csv(rows))
        self.store.write_bytes(TIMING_CSV, _csv(timing))
        meta = {'axes': list(self.names), 'name': self.cfg.name}
        self.store.write_json(ONLINE_META, meta)
        self.store.save_manifest()


def _csv(frame: pd.DataFrame) -> bytes:
    buf = StringIO()
    frame.to_csv(buf, index=False, float_format=FLOAT_FORMAT)
    return buf.getvalue().encode('utf-8')


def run_offline(
    cfg: ExperimentConfig, *, store: Optional[ArtifactStore] = None
) -> OfflineSummary:
    """Simulate training points and build every requested offline model"""
    return Experiment(cfg, store).run_offline()


def run_online(
    cfg: ExperimentConfig,
    points: Optional[Sequence[Sequence[float]]] = None,
    *,
    store: Optional[ArtifactStore] = None,
) -> List[ComparisonReport]:
    """Serve the query points with every requested variant

    Raises:
        ArtifactError: the offline artifacts are missing or stale.
    """
    return Experiment(cfg, store).run_online(points)


def _write_summary(store: ArtifactStore, summary: pd.DataFrame, rows: int) -> None:
    store.write_bytes(f'{SUMMARY_DIR}/summary.csv', _csv(summary))
    groups = json.loads(summary.to_json(orient='records'))
    store.write_json(f'{SUMMARY_DIR}/summary.json', {'rows': rows, 'groups': groups})


def _grid_name(variant: str, hyper: bool) -> str:
    return f'grid_{variant}{"_hyper" if hyper else ""}.csv'


def report(output_dir: Union[str, Path]) -> pd.DataFrame:
    """Aggregate the online results of a directory

    Writes `summary/summary.csv` and `summary/summary.json` (mean and max
    errors per partition, variant and hyper-reduction flag), one error grid
    per variant and, when timing rows exist, `summary/timing.csv`.
    """
    store = ArtifactStore(output_dir)
    by = ['partition', 'variant', 'hyper']
    if not store.exists(ONLINE_CSV):
        logger.warning('no online results in %s; writing an empty summary', output_dir)
        summary = summarize(pd.DataFrame(), by=by)
        _write_summary(store, summary, 0)
        store.save_manifest()
        return summary

    rows = pd.read_csv(BytesIO(store.read_bytes(ONLINE_CSV)))
    names = store.read_json(ONLINE_META)['axes']
    summary = summarize(rows, by=by)
    _write_summary(store, summary, len(rows))

    columns = ['partition', 'subdomain'] + list(names) + ['re_u', 're_rf', 're_sigma']
    for (variant, hyper), group in rows.groupby(['variant', 'hyper'], sort=True):
        name = f'{SUMMARY_DIR}/{_grid_name(variant, bool(hyper))}'
        store.write_bytes(name, _csv(group[columns]))

    if store.exists(TIMING_CSV):
        timing = pd.read_csv(BytesIO(store.read_bytes(TIMING_CSV)))
        timing = timing.dropna(subset=['speedup'])
        if not timing.empty:
            speed = timing.groupby(by, sort=True)['speedup']
            speed = speed.agg(['median', 'min', 'max'])
            store.write_bytes(f'{SUMMARY_DIR}/timing.csv', _csv(speed.reset_index()))

    store.save_manifest()
    logger.info('summary of %d rows written to %s', len(rows), store.path(SUMMARY_DIR))
    return summary
