"""
Experiment configuration

An experiment is described by a JSON document parsed into nested attrs
classes. Unknown keys are rejected at every level, required keys must be
present, and value ranges are checked before any computation starts.
"""
import json
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import attr

from .constants import ECSW_STRIDE, ECSW_TAU, VARIANTS
from .ecsw import SCOPES
from .errors import ConfigError
from .newmark import IntegratorConfig
from .param_space import (
    OVERLAP_STRATEGIES,
    Axis,
    Domain,
    ParameterGrid,
    partition_grid,
)

# Parameters a scenario accepts as domain axes
SCENARIO_AXES = {
    'bouc_wen': ('A', 'z_max'),
    'quake': ('cutoff_hz', 'amplitude'),
}

QUERY_MODES = ('validation', 'grid', 'points')

# Seeding of the ground-motion noise: one realization per point, or one shared
# by every point of the experiment
NOISE_SEEDING = ('per_point', 'shared')


def _one_of(choices):
    def validator(instance, attribute, value):
        if value not in choices:
            raise ConfigError(
                f'{attribute.name} must be one of {tuple(choices)}, got {value!r}'
            )

    return validator


def _positive(instance, attribute, value):
    if value is not None and not value > 0:
        raise ConfigError(f'{attribute.name} must be positive, got {value}')


def _at_least(bound):
    def validator(instance, attribute, value):
        if not value >= bound:
            raise ConfigError(f'{attribute.name} must be at least {bound}, got {value}')

    return validator


def _optional_float(value):
    return None if value is None else float(value)


def _optional_int(value):
    return None if value is None else int(value)


def _optional_tuple(value):
    return None if value is None else tuple(value)


@attr.s(frozen=True)
class ModelConfig:
    """Structure and link parameters

    `A` and `z_max` are required unless they are axes of the parameter domain.
    `z_max_scale` converts the `z_max` parameter into metres. `link_taper` is the
    ratio of the top link stiffness to the base one, linear in between.
    """

    scenario: str = attr.ib(validator=_one_of(SCENARIO_AXES))
    stories: int = attr.ib(converter=int, validator=_positive)
    story_mass: float = attr.ib(converter=float, validator=_positive)
    story_stiffness: float = attr.ib(converter=float, validator=_positive)
    damping_ratio: float = attr.ib(converter=float, validator=_positive)
    k_link: float = attr.ib(converter=float, validator=_positive)
    A: Optional[float] = attr.ib(
        default=None, converter=_optional_float, validator=_positive
    )
    z_max: Optional[float] = attr.ib(
        default=None, converter=_optional_float, validator=_positive
    )
    w: float = attr.ib(default=1.0, converter=float, validator=_at_least(1.0))
    z_max_scale: float = attr.ib(default=1.0, converter=float, validator=_positive)
    link_substeps: int = attr.ib(default=1, converter=int, validator=_positive)
    link_taper: float = attr.ib(default=1.0, converter=float, validator=_positive)


@attr.s(frozen=True)
class LoadConfig:
    """Excitation; sinusoidal for `bouc_wen`, filtered noise for `quake`"""

    total_s: float = attr.ib(converter=float, validator=_positive)
    amplitude: Optional[float] = attr.ib(
        default=None, converter=_optional_float, validator=_positive
    )
    freq_hz: Optional[float] = attr.ib(
        default=None, converter=_optional_float, validator=_positive
    )
    pattern: Optional[Tuple[float, ...]] = attr.ib(
        default=None, converter=_optional_tuple
    )
    cutoff_hz: Optional[float] = attr.ib(
        default=None, converter=_optional_float, validator=_positive
    )
    duration_s: Optional[float] = attr.ib(
        default=None, converter=_optional_float, validator=_positive
    )
    noise: str = attr.ib(default='per_point', validator=_one_of(NOISE_SEEDING))


def _axes(value) -> Tuple[Axis, ...]:
    axes = []
    for i, item in enumerate(value):
        if isinstance(item, Axis):
            axes.append(item)
            continue
        axes.append(_build(Axis, item, f'grid.axes[{i}]'))
    return tuple(axes)


@attr.s(frozen=True)
class GridConfig:
    """Domain box and its partitioning (`divisions` or `extents`)"""

    axes: Tuple[Axis, ...] = attr.ib(converter=_axes)
    divisions: Optional[Tuple[int, ...]] = attr.ib(
        default=None, converter=_optional_tuple
    )
    extents: Optional[Tuple[float, ...]] = attr.ib(
        default=None, converter=_optional_tuple
    )
    overlap: str = attr.ib(default='anchored', validator=_one_of(OVERLAP_STRATEGIES))

    def __attrs_post_init__(self):
        if (self.divisions is None) == (self.extents is None):
            raise ConfigError('grid needs exactly one of divisions or extents')

    @property
    def domain(self) -> Domain:
        return Domain(self.axes)

    def partition(self) -> ParameterGrid:
        return partition_grid(
            self.domain,
            divisions=self.divisions,
            extents=self.extents,
            overlap=self.overlap,
        )


def _variants(value) -> Tuple[str, ...]:
    if isinstance(value, str):
        value = [v.strip() for v in value.split(',') if v.strip()]
    value = tuple(value)
    unknown = [v for v in value if v not in VARIANTS]
    if unknown or not value:
        raise ConfigError(f'variants must be a non-empty subset of {VARIANTS}')
    # Canonical order keeps outputs independent of how variants were listed
    return tuple(v for v in VARIANTS if v in value)


@attr.s(frozen=True)
class ReductionConfig:
    """Reduction orders and variants

    All variants share the order `r_local`. `r_global` is the number of
    columns kept in each region's compressed tangent basis (all by default).
    """

    r_local: int = attr.ib(converter=int, validator=_positive)
    r_global: Optional[int] = attr.ib(
        default=None, converter=_optional_int, validator=_positive
    )
    variants: Tuple[str, ...] = attr.ib(default=VARIANTS, converter=_variants)


@attr.s(frozen=True)
class EcswConfig:
    enabled: bool = attr.ib(default=False, validator=attr.validators.instance_of(bool))
    tau: float = attr.ib(default=ECSW_TAU, converter=float)
    stride: int = attr.ib(default=ECSW_STRIDE, converter=int, validator=_positive)
    scope: str = attr.ib(default='subdomain', validator=_one_of(SCOPES))

    @tau.validator
    def _check_tau(self, attribute, value):
        if not 0 < value <= 1:
            raise ConfigError(f'tau must lie in (0, 1], got {value}')


@attr.s(frozen=True)
class TimingConfig:
    """Timed runs: `warmup` discarded runs, then the median of `repeats`"""

    enabled: bool = attr.ib(default=False, validator=attr.validators.instance_of(bool))
    warmup: int = attr.ib(default=1, converter=int)
    repeats: int = attr.ib(default=3, converter=int, validator=_positive)

    @warmup.validator
    def _check_warmup(self, attribute, value):
        if value < 0:
            raise ConfigError(f'warmup must be non-negative, got {value}')


def _points(value):
    if value is None:
        return None
    return tuple(tuple(float(c) for c in p) for p in value)


@attr.s(frozen=True)
class QueryConfig:
    """Online query points

    `validation` queries every subdomain at the midpoints between its corners
    and its centroid, `grid` samples the whole domain on a regular grid of
    `counts` points per axis, `points` uses the listed coordinates.
    """

    mode: str = attr.ib(default='validation', validator=_one_of(QUERY_MODES))
    counts: Optional[Tuple[int, ...]] = attr.ib(default=None, converter=_optional_tuple)
    points: Optional[Tuple[Tuple[float, ...], ...]] = attr.ib(
        default=None, converter=_points
    )


_SECTIONS = {
    'model': ModelConfig,
    'load': LoadConfig,
    'grid': GridConfig,
    'reduction': ReductionConfig,
    'ecsw': EcswConfig,
    'integrator': IntegratorConfig,
    'timing': TimingConfig,
    'queries': QueryConfig,
}


@attr.s(frozen=True)
class ExperimentConfig:
    name: str = attr.ib(validator=attr.validators.instance_of(str))
    output: str = attr.ib(converter=str)
    model: ModelConfig = attr.ib()
    load: LoadConfig = attr.ib()
    grid: GridConfig = attr.ib()
    reduction: ReductionConfig = attr.ib()
    seed: int = attr.ib(default=0, converter=int)
    workers: int = attr.ib(default=1, converter=int, validator=_positive)
    literal_denominator: bool = attr.ib(
        default=False, validator=attr.validators.instance_of(bool)
    )
    ecsw: EcswConfig = attr.ib(factory=EcswConfig)
    integrator: IntegratorConfig = attr.ib(factory=IntegratorConfig)
    timing: TimingConfig = attr.ib(factory=TimingConfig)
    queries: QueryConfig = attr.ib(factory=QueryConfig)

    def __attrs_post_init__(self):
        allowed = SCENARIO_AXES[self.model.scenario]
        names = self.grid.domain.names
        unknown = [n for n in names if n not in allowed]
        if unknown:
            raise ConfigError(
                f'grid axes {unknown} are not parameters of the '
                f'{self.model.scenario!r} scenario (expected some of {allowed})'
            )

        if self.model.scenario == 'bouc_wen':
            self._require('model', ('A', 'z_max'), names)
            self._require('load', ('amplitude', 'freq_hz'), ())
            pattern = self.load.pattern
            if pattern is not None and len(pattern) != self.model.stories:
                raise ConfigError(
                    f'load.pattern needs {self.model.stories} entries, '
                    f'got {len(pattern)}'
                )
        else:
            self._require('model', ('A', 'z_max'), ())
            self._require('load', ('cutoff_hz', 'amplitude', 'duration_s'), names)
            if self.load.duration_s > self.load.total_s:
                raise ConfigError('load.duration_s exceeds load.total_s')

        if self.queries.mode == 'points':
            if not self.queries.points:
                raise ConfigError('queries.points is required in points mode')
            bad = [p for p in self.queries.points if len(p) != len(names)]
            if bad:
                raise ConfigError(f'query points must have {len(names)} coordinates')
        if self.queries.mode == 'grid' and self.queries.counts is None:
            raise ConfigError('queries.counts is required in grid mode')

    def _require(self, section: str, keys: Sequence[str], axes: Sequence[str]) -> None:
        block = getattr(self, section)
        missing = [k for k in keys if k not in axes and getattr(block, k) is None]
        if missing:
            raise ConfigError(
                'missing required keys: ' + ', '.join(f'{section}.{k}' for k in missing)
            )

    def to_dict(self) -> Dict[str, Any]:
        return attr.asdict(self, recurse=True)


def _build(cls, data: Any, path: str):
    if not isinstance(data, dict):
        raise ConfigError(f'{path or "config"} must be an object')

    fields = {a.name: a for a in attr.fields(cls) if a.init}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(
            'unknown keys: ' + ', '.join(f'{path}.{k}' if path else k for k in unknown)
        )
    missing = [
        name
        for name, a in fields.items()
        if a.default is attr.NOTHING and name not in data
    ]
    if missing:
        raise ConfigError(
            'missing required keys: '
            + ', '.join(f'{path}.{k}' if path else k for k in missing)
        )

    kwargs = {}
    for key, value in data.items():
        section = _SECTIONS.get(key) if cls is ExperimentConfig else None
        child = f'{path}.{key}' if path else key
        kwargs[key] = _build(section, value, child) if section else value

    try:
        return cls(**kwargs)
    except ConfigError as err:
        raise ConfigError(f'{path or "config"}: {err}') from err
    except (TypeError, ValueError) as err:
        raise ConfigError(f'{path or "config"}: {err}') from err


def parse_config(data: Dict[str, Any]) -> ExperimentConfig:
    """Validate a configuration document"""
    return _build(ExperimentConfig, data, '')


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except OSError as err:
        raise ConfigError(f'cannot read config {path}: {err}') from err
    except ValueError as err:
        raise ConfigError(f'config {path} is not valid JSON: {err}') from err
    return parse_config(data)


def apply_overrides(
    cfg: ExperimentConfig,
    *,
    seed: Optional[int] = None,
    variants: Optional[Union[str, Sequence[str]]] = None,
    tau: Optional[float] = None,
    out: Optional[str] = None,
    workers: Optional[int] = None,
) -> ExperimentConfig:
    """Apply command-line overrides"""
    changes: Dict[str, Any] = {}
    if seed is not None:
        changes['seed'] = seed
    if out is not None:
        changes['output'] = out
    if workers is not None:
        changes['workers'] = workers
    if variants is not None:
        changes['reduction'] = attr.evolve(cfg.reduction, variants=variants)
    if tau is not None:
        changes['ecsw'] = attr.evolve(cfg.ecsw, tau=tau, enabled=True)
    try:
        return attr.evolve(cfg, **changes)
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from err
