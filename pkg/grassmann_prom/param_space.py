"""
Parameter domain, rectangular partitioning and interpolation weights

All distances are measured in normalized coordinates: every axis is mapped
affinely onto [0, 1] over the declared domain before any comparison, since the
axes carry incommensurate units (amplitude factors, Hz, hysteretic limits).
"""
import itertools
from typing import List, Optional, Sequence, Tuple

import attr
import numpy as np

from .constants import COINCIDENCE_TOL, SHEPARD_POWER
from .errors import ConfigError, OutOfDomainError

OVERLAP_STRATEGIES = ('anchored', 'none')

# Relative slack used when counting whole cells along an axis, so that
# extents dividing the axis exactly are not lost to rounding
_COUNT_SLACK = 1e-9


def _to_coords(value) -> Tuple[float, ...]:
    coords = tuple(float(c) for c in np.atleast_1d(np.asarray(value, dtype=float)))
    if len(coords) < 1:
        raise ConfigError('a parameter point needs at least one coordinate')
    if not all(np.isfinite(coords)):
        raise ConfigError(f'parameter point has non-finite coordinates: {coords}')
    return coords


@attr.s(frozen=True)
class ParameterPoint:
    """A point of the l-dimensional parameter domain

    Args:
        coords: coordinates in physical units, ordered as the domain axes
    """

    coords: Tuple[float, ...] = attr.ib(converter=_to_coords)

    def __len__(self) -> int:
        return len(self.coords)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coords, dtype=np.float64)

    def key(self) -> str:
        """Canonical text form, stable across runs"""
        return ','.join(repr(c) for c in self.coords)


@attr.s(frozen=True)
class Axis:
    """One axis of the parameter domain

    Args:
        name: parameter name referenced by the scenario (e.g. `'A'`)
        lower: lower bound in physical units
        upper: upper bound in physical units
        unit: physical unit label, informational only
    """

    name: str = attr.ib(validator=attr.validators.instance_of(str))
    lower: float = attr.ib(converter=float)
    upper: float = attr.ib(converter=float)
    unit: str = attr.ib(default='', validator=attr.validators.instance_of(str))

    def __attrs_post_init__(self):
        if not (np.isfinite(self.lower) and np.isfinite(self.upper)):
            raise ConfigError(f'axis {self.name!r} has non-finite bounds')
        if not self.upper > self.lower:
            raise ConfigError(
                f'axis {self.name!r} is degenerate: '
                f'[{self.lower}, {self.upper}] has zero or negative width'
            )

    @property
    def width(self) -> float:
        return self.upper - self.lower


@attr.s(frozen=True)
class Domain:
    """Rectangular parameter domain (the box Omega)"""

    axes: Tuple[Axis, ...] = attr.ib(converter=tuple)

    def __attrs_post_init__(self):
        if len(self.axes) < 1:
            raise ConfigError('a domain needs at least one axis')
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ConfigError(f'duplicate axis names: {names}')

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    @property
    def lower(self) -> np.ndarray:
        return np.array([a.lower for a in self.axes])

    @property
    def upper(self) -> np.ndarray:
        return np.array([a.upper for a in self.axes])

    @property
    def widths(self) -> np.ndarray:
        return np.array([a.width for a in self.axes])

    @property
    def dim(self) -> int:
        return len(self.axes)

    def normalize(self, coords) -> np.ndarray:
        """Map physical coordinates (shape (l,) or (k, l)) onto the unit box"""
        coords = np.asarray(coords, dtype=np.float64)
        return (coords - self.lower) / self.widths

    def denormalize(self, unit_coords) -> np.ndarray:
        unit_coords = np.asarray(unit_coords, dtype=np.float64)
        return self.lower + unit_coords * self.widths

    def contains(self, point: ParameterPoint, tol: float = COINCIDENCE_TOL) -> bool:
        self._check_dim(point)
        x = self.normalize(point.coords)
        return bool(np.all(x >= -tol) and np.all(x <= 1 + tol))

    def point(self, values) -> ParameterPoint:
        """Build a point from a sequence or from a mapping of axis name to value"""
        if isinstance(values, dict):
            unknown = set(values) - set(self.names)
            if unknown:
                raise ConfigError(f'unknown parameter names: {sorted(unknown)}')
            missing = [n for n in self.names if n not in values]
            if missing:
                raise ConfigError(f'missing parameter values: {missing}')
            values = [values[n] for n in self.names]
        point = ParameterPoint(values)
        self._check_dim(point)
        return point

    def _check_dim(self, point: ParameterPoint) -> None:
        if len(point) != self.dim:
            raise ConfigError(
                f'point {point.coords} has {len(point)} coordinates, '
                f'domain has {self.dim} axes'
            )


@attr.s
class Subdomain:
    """Rectangular cell of the parameter grid

    Training points are the 2^l corners (in `itertools.product` order over the
    axes) followed by the centroid, which is the reference point anchoring the
    tangent space of the region.

    Args:
        index: position of the subdomain in its grid
        lower: lower corner
        upper: upper corner
        domain: the enclosing domain, which defines the normalization
        overlapping: whether the cell was added to cover a remainder strip
    """

    index: int = attr.ib(validator=attr.validators.instance_of(int))
    lower: ParameterPoint = attr.ib(
        validator=attr.validators.instance_of(ParameterPoint)
    )
    upper: ParameterPoint = attr.ib(
        validator=attr.validators.instance_of(ParameterPoint)
    )
    domain: Domain = attr.ib(
        repr=False, validator=attr.validators.instance_of(Domain)
    )
    overlapping: bool = attr.ib(default=False)
    training_points: Tuple[ParameterPoint, ...] = attr.ib(init=False, repr=False)
    reference_index: int = attr.ib(init=False)

    def __attrs_post_init__(self):
        lo = self.lower.array
        hi = self.upper.array
        if lo.shape != hi.shape or lo.shape[0] != self.domain.dim:
            raise ConfigError('subdomain corners do not match the domain')
        if not np.all(lo < hi):
            raise ConfigError(
                f'subdomain {self.index} is degenerate: {self.lower.coords} '
                f'is not below {self.upper.coords} in every component'
            )

        corners = [
            ParameterPoint(c) for c in itertools.product(*zip(lo.tolist(), hi.tolist()))
        ]
        centroid = ParameterPoint(lo + (hi - lo) / 2)
        self.training_points = tuple(corners) + (centroid,)
        self.reference_index = len(corners)

    @property
    def centroid(self) -> ParameterPoint:
        return self.training_points[self.reference_index]

    @property
    def normalized_training(self) -> np.ndarray:
        return self.domain.normalize([p.coords for p in self.training_points])

    @property
    def normalized_centroid(self) -> np.ndarray:
        return self.domain.normalize(self.centroid.coords)

    def contains(self, point: ParameterPoint, tol: float = COINCIDENCE_TOL) -> bool:
        x = self.domain.normalize(point.coords)
        lo = self.domain.normalize(self.lower.coords)
        hi = self.domain.normalize(self.upper.coords)
        return bool(np.all(x >= lo - tol) and np.all(x <= hi + tol))

    def label(self) -> str:
        return f'sub_{self.index:03d}'


@attr.s
class ParameterGrid:
    """Partition of the domain into (possibly overlapping) rectangular cells"""

    domain: Domain = attr.ib(validator=attr.validators.instance_of(Domain))
    subdomains: Tuple[Subdomain, ...] = attr.ib(converter=tuple)
    overlap: bool = attr.ib(default=False)

    def __len__(self) -> int:
        return len(self.subdomains)

    @property
    def base_count(self) -> int:
        return sum(1 for s in self.subdomains if not s.overlapping)

    @property
    def overlapping_count(self) -> int:
        return sum(1 for s in self.subdomains if s.overlapping)

    def locate(self, point: ParameterPoint) -> Subdomain:
        return locate(self, point)

    def training_points(self) -> List[ParameterPoint]:
        """Unique training points of all subdomains, in first-seen order

        Corners shared between neighbouring cells are simulated once.
        """
        seen = {}
        for sub in self.subdomains:
            for point in sub.training_points:
                seen.setdefault(_snap_key(self.domain, point), point)
        return list(seen.values())

    def canonical(self, point: ParameterPoint) -> ParameterPoint:
        """Return the grid's training point coinciding with `point`, if any"""
        key = _snap_key(self.domain, point)
        for candidate in self.training_points():
            if _snap_key(self.domain, candidate) == key:
                return candidate
        return point


def _snap_key(domain: Domain, point: ParameterPoint) -> Tuple[float, ...]:
    return tuple(np.round(domain.normalize(point.coords), 10).tolist())


def _axis_cells(
    lower: float, upper: float, extent: float, overlap: str
) -> List[Tuple[float, float, bool]]:
    """Cells along one axis as (start, end, is_overlapping)"""
    width = upper - lower
    count = int(np.floor(width / extent + _COUNT_SLACK))
    if count < 1:
        raise ConfigError(
            f'subdomain extent {extent} exceeds the axis width {width}'
        )

    cells = []
    for i in range(count):
        start = lower + i * extent
        end = lower + (i + 1) * extent
        cells.append((start, end, False))

    remainder = width - count * extent
    if remainder <= _COUNT_SLACK * width:
        # Snap the last cell onto the domain boundary
        start, _, _ = cells[-1]
        cells[-1] = (start, upper, False)
        return cells

    if overlap == 'anchored':
        cells.append((upper - extent, upper, True))
    else:
        cells.append((lower + count * extent, upper, False))
    return cells


def partition_grid(
    domain: Domain,
    *,
    divisions: Optional[Sequence[int]] = None,
    extents: Optional[Sequence[float]] = None,
    overlap: str = 'anchored',
) -> ParameterGrid:
    """Partition the domain into rectangular subdomains

    Args:
        - domain: the parameter domain
        - divisions: number of equal cells per axis; mutually exclusive with
          `extents`
        - extents: physical cell size per axis. When an axis is not an integer
          multiple of its extent, the leftover strip is covered according to
          `overlap`.
        - overlap: `'anchored'` adds cells of full extent anchored to the upper
          boundary, overlapping the last regular cell (every combination that
          involves an anchored position on at least one axis becomes an
          overlapping subdomain); `'none'` closes the strip with a smaller,
          non-overlapping cell.

    Returns:
        ParameterGrid whose regular cells come first, then the overlapping ones.

    On the box `A in [0.1, 1.0]`, `z_max in [1e4, 5e4]` with anchored overlap,
    extents `(0.4, 1.6e4)` give 2 regular positions plus one anchored position
    per axis: 4 regular and 3 * 3 - 4 = 5 overlapping subdomains. Extents
    `(0.2, 0.8e4)` give 4 + 1 positions on `A` and exactly 5 on `z_max`: 20
    regular and 5 overlapping subdomains.
    """
    if overlap not in OVERLAP_STRATEGIES:
        raise ConfigError(
            f'overlap must be one of {OVERLAP_STRATEGIES}, got {overlap!r}'
        )
    if (divisions is None) == (extents is None):
        raise ConfigError('exactly one of divisions or extents must be given')

    widths = domain.widths
    if divisions is not None:
        divisions = [int(d) for d in divisions]
        if len(divisions) != domain.dim or any(d < 1 for d in divisions):
            raise ConfigError(f'divisions must be >= 1 per axis, got {divisions}')
        extents = [w / d for w, d in zip(widths, divisions)]
    else:
        extents = [float(e) for e in extents]
        if len(extents) != domain.dim or any(not e > 0 for e in extents):
            raise ConfigError(f'extents must be positive per axis, got {extents}')

    per_axis = [
        _axis_cells(ax.lower, ax.upper, ext, overlap)
        for ax, ext in zip(domain.axes, extents)
    ]

    regular = []
    overlapping = []
    for combo in itertools.product(*per_axis):
        lower = ParameterPoint([c[0] for c in combo])
        upper = ParameterPoint([c[1] for c in combo])
        if any(c[2] for c in combo):
            overlapping.append((lower, upper))
        else:
            regular.append((lower, upper))

    subdomains = []
    for lower, upper in regular:
        subdomains.append(Subdomain(len(subdomains), lower, upper, domain))
    for lower, upper in overlapping:
        subdomains.append(
            Subdomain(len(subdomains), lower, upper, domain, overlapping=True)
        )

    return ParameterGrid(domain, subdomains, overlap=bool(overlapping))


def locate(grid: ParameterGrid, point: ParameterPoint) -> Subdomain:
    """Find the subdomain serving a query point

    Among the subdomains containing the point, the one whose centroid is
    nearest in normalized coordinates wins; ties go to the lowest index.
    """
    if not grid.domain.contains(point):
        raise OutOfDomainError(
            f'point {point.coords} lies outside the domain; '
            'extrapolation is not supported'
        )

    candidates = [s for s in grid.subdomains if s.contains(point)]
    if not candidates:
        raise OutOfDomainError(f'point {point.coords} lies outside every subdomain')

    x = grid.domain.normalize(point.coords)
    distances = [np.linalg.norm(x - s.normalized_centroid) for s in candidates]
    best = min(distances)
    for sub, dist in zip(candidates, distances):
        if dist <= best + COINCIDENCE_TOL:
            return sub


def interpolation_weights(
    sub: Subdomain, point: ParameterPoint, *, power: int = SHEPARD_POWER
) -> np.ndarray:
    """Inverse-distance (Shepard) weights over the subdomain's training points

    Returns:
        Non-negative weights summing to one, ordered as
        `sub.training_points`. A query coinciding with a training point gets
        that point's indicator vector.
    """
    if not sub.contains(point):
        raise OutOfDomainError(
            f'point {point.coords} lies outside subdomain {sub.index}'
        )

    x = sub.domain.normalize(point.coords)
    distances = np.linalg.norm(sub.normalized_training - x, axis=1)

    nearest = int(np.argmin(distances))
    if distances[nearest] < COINCIDENCE_TOL:
        weights = np.zeros(len(distances))
        weights[nearest] = 1.0
        return weights

    inverse = distances ** (-float(power))
    return inverse / inverse.sum()


def validation_points(sub: Subdomain) -> List[ParameterPoint]:
    """Midpoints between each corner training point and the centroid"""
    centroid = sub.centroid.array
    corners = sub.training_points[: sub.reference_index]
    return [ParameterPoint((c.array + centroid) / 2) for c in corners]


def sample_domain(domain: Domain, counts: Sequence[int]) -> List[ParameterPoint]:
    """Regular grid of points over the domain, boundaries included"""
    counts = [int(c) for c in counts]
    if len(counts) != domain.dim or any(c < 1 for c in counts):
        raise ConfigError(f'counts must be >= 1 per axis, got {counts}')

    axes = []
    for ax, c in zip(domain.axes, counts):
        if c > 1:
            axes.append(np.linspace(ax.lower, ax.upper, c))
        else:
            axes.append(np.array([ax.lower + ax.width / 2]))
    return [ParameterPoint(p) for p in itertools.product(*axes)]
