"""
Invariant suites run on demand

Each check computes one quantity against an oracle or a bound and reports it
as a row of a DataFrame (`check`, `value`, `limit`, `passed`).
"""
import logging
from io import BytesIO
from pathlib import Path
from typing import Callable, List, Union

import attr
import numpy as np
import pandas as pd
from scipy import linalg

from . import fem
from .excite import LoadHistory, sinusoid
from .grassmann import exp_map, largest_principal_angle, log_map
from .metrics import relative_error
from .newmark import FullOrderSystem, IntegratorConfig, integrate, mechanical_energy
from .param_space import Axis, Domain, ParameterPoint, Subdomain
from .pod import Provenance, ReductionBasis, SnapshotSet, orthonormality_error
from .prom import (
    OperationCounter,
    build_region,
    interpolate_coefficients,
    interpolate_entries,
)
from .storage import ArtifactStore

logger = logging.getLogger(__name__)


@attr.s
class CheckResult:
    name: str = attr.ib()
    value: float = attr.ib(converter=float)
    limit: float = attr.ib(converter=float)
    upper: bool = attr.ib(default=True)

    @property
    def passed(self) -> bool:
        if self.upper:
            return bool(self.value < self.limit)
        return bool(self.value >= self.limit)

    def row(self) -> dict:
        return {
            'check': self.name,
            'value': self.value,
            'limit': self.limit,
            'passed': self.passed,
        }


def random_basis(rng: np.random.Generator, n: int, r: int) -> np.ndarray:
    Q, _ = linalg.qr(rng.standard_normal((n, r)), mode='economic')
    return Q


def nearby_basis(rng: np.random.Generator, V: np.ndarray, scale: float) -> np.ndarray:
    Q, _ = linalg.qr(V + scale * rng.standard_normal(V.shape), mode='economic')
    return Q


def _basis(matrix: np.ndarray, source: str) -> ReductionBasis:
    return ReductionBasis(matrix, None, Provenance.LOCAL_SNAPSHOT, source)


def synthetic_region(rng: np.random.Generator, n: int, r: int, spread: float = 0.1):
    """Unit-square subdomain whose training snapshots span nearby r-subspaces"""
    domain = Domain((Axis('a', 0.0, 1.0), Axis('b', 0.0, 1.0)))
    sub = Subdomain(0, ParameterPoint((0.0, 0.0)), ParameterPoint((1.0, 1.0)), domain)

    V = random_basis(rng, n, r)
    steps = 2 * r
    energies = np.linspace(float(r), 1.0, r)
    snapshots = []
    for point in sub.training_points:
        Vi = nearby_basis(rng, V, spread)
        W = random_basis(rng, steps, r)
        snapshots.append(SnapshotSet(point, Vi @ np.diag(energies) @ W.T))
    return sub, snapshots


def check_grassmann_round_trip(
    rng: np.random.Generator, pairs: int = 100, n: int = 40, r: int = 5
) -> List[CheckResult]:
    distance = 0.0
    orthonormality = 0.0
    for i in range(pairs):
        V0 = random_basis(rng, n, r)
        v0 = _basis(V0, 'reference')
        vi = _basis(nearby_basis(rng, V0, 0.2), f'pair_{i}')
        back = exp_map(v0, log_map(v0, vi))
        distance = max(distance, largest_principal_angle(back, vi))
        orthonormality = max(orthonormality, orthonormality_error(back.matrix))
    return [
        CheckResult('grassmann_round_trip_angle', distance, 1e-9),
        CheckResult('grassmann_round_trip_orthonormality', orthonormality, 1e-10),
    ]


def check_untruncated_equivalence(rng: np.random.Generator) -> List[CheckResult]:
    sub, snapshots = synthetic_region(rng, n=60, r=4)
    region = build_region(sub, snapshots, 4)
    q = ParameterPoint((0.3, 0.7))
    angle = largest_principal_angle(
        interpolate_coefficients(region, q), interpolate_entries(region, q)
    )
    return [CheckResult('untruncated_interpolation_angle', angle, 1e-9)]


def check_cost_scaling(rng: np.random.Generator) -> List[CheckResult]:
    counts = {}
    q = ParameterPoint((0.25, 0.6))
    for n in (50, 500, 5000):
        sub, snapshots = synthetic_region(rng, n=n, r=4)
        region = build_region(sub, snapshots, 4)
        entries = OperationCounter()
        coefficients = OperationCounter()
        interpolate_entries(region, q, entries)
        interpolate_coefficients(region, q, coefficients)
        counts[n] = (entries.interpolation, coefficients.interpolation)
    return [
        CheckResult(
            'coefficient_cost_growth', counts[5000][1] / counts[50][1], 1.0 + 1e-12
        ),
        CheckResult(
            'entry_cost_growth', counts[5000][0] / counts[50][0], 10.0, upper=False
        ),
    ]


def _single_link(A: float = 1.0, z_max: float = 1.0, w: float = 1.0) -> fem.LinkSet:
    link = fem.BoucWenLink.from_amplitude(0, 1, 1.0, A, z_max, w)
    return fem.LinkSet.from_links([link])


def check_saturation() -> List[CheckResult]:
    links = _single_link()
    z = np.zeros(1)
    for _ in range(200):
        z, _, _ = fem.advance_links(links, z, np.full(1, 0.05))
    gap = abs(z[0] - links.z_max[0]) / links.z_max[0]
    return [CheckResult('bouc_wen_saturation_gap', gap, 0.01)]


def check_rk4_oracle(rng: np.random.Generator, trials: int = 50) -> List[CheckResult]:
    worst = 0.0
    for w in (1.0, 2.0):
        links = _single_link(w=w)
        for _ in range(trials):
            # States away from zero, where the w = 1 law has a kink
            z0 = rng.uniform(0.1, 0.6, size=1)
            delta = rng.uniform(-0.05, 0.05, size=1)
            coarse, _, _ = fem.advance_links(links, z0, delta, 1)
            fine, _, _ = fem.advance_links(links, z0, delta, 10000)
            worst = max(worst, float(np.abs(coarse - fine).max()))
    return [CheckResult('rk4_substep_oracle', worst, 1e-6)]


def cycle_energy(links: fem.LinkSet, amplitude: float, z0=0.0, repeats: int = 5):
    """Work of the link force over the last of `repeats` cycles 0 -> a -> -a -> 0

    Returns:
        (energy, final state)
    """
    h = amplitude / 100
    path = np.concatenate(
        [
            np.arange(0, amplitude, h),
            np.arange(amplitude, -amplitude, -h),
            np.arange(-amplitude, 0, h),
            [0.0],
        ]
    )
    z = np.full(1, z0)
    scale = links.force_scale[0]
    energy = 0.0
    for _ in range(repeats):
        energy = 0.0
        for x_prev, x in zip(path[:-1], path[1:]):
            z_new, _, _ = fem.advance_links(links, z, np.full(1, x - x_prev), 4)
            energy += scale * 0.5 * (z[0] + z_new[0]) * (x - x_prev)
            z = z_new
    return energy, z


def check_dissipation(rng: np.random.Generator, cycles: int = 100) -> List[CheckResult]:
    links = _single_link()
    worst = np.inf
    z = 0.0
    for a in rng.uniform(0.5, 3.0, size=cycles):
        energy, state = cycle_energy(links, a, z)
        z = state[0]
        worst = min(worst, energy / (links.force_scale[0] * a))
    return [CheckResult('hysteresis_energy_per_cycle', worst, -1e-9, upper=False)]


def _sdof(mass: float, damping: float, stiffness: float) -> fem.StructuralModel:
    return fem.StructuralModel([[mass]], [[damping]], [[stiffness]])


def check_sdof_amplitude() -> List[CheckResult]:
    m, k, zeta = 1.0, (2 * np.pi) ** 2, 0.05
    c = 2 * zeta * np.sqrt(k * m)
    freq, F0, dt, total = 0.5, 1.0, 1e-3, 40.0
    loads = sinusoid(freq, F0, [1.0], dt, int(round(total / dt)))
    history = integrate(
        FullOrderSystem(_sdof(m, c, k)), loads, IntegratorConfig(dt=dt)
    )

    omega = 2 * np.pi * freq
    expected = F0 / np.hypot(k - m * omega**2, c * omega)
    tail = history.displacements[-int(round(5.0 / dt)):, 0]
    measured = np.abs(tail).max()
    return [CheckResult('sdof_amplitude', abs(measured - expected) / expected, 1e-3)]


def check_energy_drift() -> List[CheckResult]:
    m, k, dt = 1.0, (2 * np.pi) ** 2, 0.01
    model = _sdof(m, 0.0, k)
    loads = LoadHistory(dt, np.zeros((int(round(10.0 / dt)) + 1, 1)))
    history = integrate(
        FullOrderSystem(model), loads, IntegratorConfig(dt=dt), u0=np.ones(1)
    )
    energy = mechanical_energy(model.mass, model.linear_stiffness, history)
    drift = np.abs(energy - energy[0]).max() / energy[0]
    return [CheckResult('undamped_energy_drift', drift, 1e-6)]


def check_error_metric(rng: np.random.Generator) -> List[CheckResult]:
    q = rng.standard_normal((30, 4))
    eps = 1e-3
    return [
        CheckResult('error_metric_identity', relative_error(q, q), 1e-15),
        CheckResult('error_metric_zero', abs(relative_error(q, 0 * q) - 1), 1e-12),
        CheckResult(
            'error_metric_scaling', abs(relative_error(q, (1 + eps) * q) - eps), 1e-12
        ),
    ]


SUITES = {
    'grassmann': lambda rng: check_grassmann_round_trip(rng),
    'interpolation': lambda rng: check_untruncated_equivalence(rng),
    'cost': lambda rng: check_cost_scaling(rng),
    'bouc_wen': lambda rng: (
        check_saturation() + check_rk4_oracle(rng) + check_dissipation(rng)
    ),
    'integrator': lambda rng: check_sdof_amplitude() + check_energy_drift(),
    'metrics': lambda rng: check_error_metric(rng),
}


def run_checks(seed: int = 0, suites=None) -> pd.DataFrame:
    """Run the invariant suites; `suites` selects a subset of `SUITES`"""
    names = list(SUITES) if suites is None else list(suites)
    unknown = [s for s in names if s not in SUITES]
    msg = f'unknown suites {unknown}'
    assert not unknown, msg

    rng = np.random.default_rng(seed)
    results = []
    for name in names:
        suite: Callable = SUITES[name]
        logger.info('running %s checks', name)
        results.extend(suite(rng))
    return pd.DataFrame([r.row() for r in results])


def _online_rows(output_dir: Union[str, Path]) -> pd.DataFrame:
    """Non-hyper-reduced rows of an online run"""
    store = ArtifactStore(output_dir)
    rows = pd.read_csv(BytesIO(store.read_bytes('online.csv')))
    return rows[~rows['hyper'].astype(bool)]


def _frame(results: List[CheckResult]) -> pd.DataFrame:
    return pd.DataFrame(
        [r.row() for r in results], columns=['check', 'value', 'limit', 'passed']
    )


def check_orderings(output_dir: Union[str, Path]) -> pd.DataFrame:
    """Variant orderings on the mean displacement error of an online run

    Expected on a well-resolved partition: both interpolation variants beat
    the local basis, which beats the global basis, and coefficient
    interpolation stays within 1.2 times entry interpolation.
    """
    mean = _online_rows(output_dir).groupby('variant')['re_u'].mean()

    results = []
    if {'entries', 'coefficients', 'local'} <= set(mean.index):
        interpolated = max(mean['entries'], mean['coefficients'])
        results.append(
            CheckResult('interpolation_below_local', interpolated / mean['local'], 1.0)
        )
        results.append(
            CheckResult(
                'coefficients_within_entries',
                mean['coefficients'] / mean['entries'],
                1.2 + 1e-12,
            )
        )
    if {'local', 'global'} <= set(mean.index):
        results.append(
            CheckResult('local_below_global', mean['local'] / mean['global'], 1.0)
        )
    if not results:
        logger.warning('%s lacks the variants needed for ordering checks', output_dir)
    return _frame(results)


def check_refinement(
    coarse_dir: Union[str, Path],
    refined_dir: Union[str, Path],
    variant: str = 'coefficients',
) -> pd.DataFrame:
    """Refining the partition must strictly lower the mean errors of `variant`

    Compares the mean `re_u` and `re_rf` of two online runs of the same
    problem, one on a coarse and one on a refined partition. Each value is the
    refined mean over the coarse mean and passes below 1.
    """
    results = []
    coarse = _online_rows(coarse_dir)
    refined = _online_rows(refined_dir)
    coarse = coarse[coarse['variant'] == variant]
    refined = refined[refined['variant'] == variant]
    if coarse.empty or refined.empty:
        logger.warning('no %s rows to compare across partitions', variant)
        return _frame(results)

    for column in ('re_u', 're_rf'):
        ratio = refined[column].mean() / coarse[column].mean()
        results.append(CheckResult(f'refinement_{column}', ratio, 1.0))
    return _frame(results)
