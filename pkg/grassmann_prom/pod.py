"""
Snapshot sets and proper orthogonal decomposition

Snapshots are raw displacement columns, without mean subtraction or velocity
augmentation. All bases use the same sign convention: the largest-magnitude
entry of every column is positive, which makes SVD output reproducible.

Ref:
https://en.wikipedia.org/wiki/Proper_orthogonal_decomposition
"""
import enum
import hashlib
import logging
from typing import Callable, List, Optional, Sequence, Tuple

import attr
import numpy as np
import pandas as pd
from scipy import linalg

from .constants import ORTHONORMALITY_TOL
from .errors import ConfigError, NumericalError, RankDeficiencyError
from .param_space import ParameterPoint

logger = logging.getLogger(__name__)


class Provenance(enum.Enum):
    LOCAL_SNAPSHOT = 'local_snapshot'
    GLOBAL_REGION = 'global_region'
    GLOBAL_DOMAIN = 'global_domain'
    INTERPOLATED = 'interpolated'


@attr.s
class SnapshotSet:
    """Training simulation at one parameter point

    Args:
        parameter_point: where the simulation was run
        displacements: n x T displacement history, one column per step
        link_forces: optional T x n_e link force history for hyper-reduction
        label: identifier used in diagnostics and artifact names
    """

    parameter_point: Optional[ParameterPoint] = attr.ib()
    displacements: np.ndarray = attr.ib(
        converter=lambda x: np.array(x, dtype=np.float64, ndmin=2), repr=False
    )
    link_forces: Optional[np.ndarray] = attr.ib(default=None, repr=False)
    label: str = attr.ib(default='')

    def __attrs_post_init__(self):
        msg = 'snapshot displacements must be finite'
        assert np.all(np.isfinite(self.displacements)), msg
        if self.link_forces is not None:
            self.link_forces = np.asarray(self.link_forces, dtype=np.float64)
            msg = 'link force history must have one row per snapshot column'
            assert self.link_forces.shape[0] == self.displacements.shape[1], msg
        if not self.label and self.parameter_point is not None:
            self.label = self.parameter_point.key()

    @property
    def n(self) -> int:
        return self.displacements.shape[0]

    @property
    def steps(self) -> int:
        return self.displacements.shape[1]


@attr.s
class ReductionBasis:
    """Orthonormal n x r reduction basis

    Args:
        matrix: n x r matrix with orthonormal columns
        singular_values: non-increasing singular values of the retained modes;
            `None` for bases not produced by an SVD (interpolated bases)
        provenance: how the basis was produced
        source: parameter point key or subdomain label
    """

    matrix: np.ndarray = attr.ib(repr=False)
    singular_values: Optional[np.ndarray] = attr.ib(repr=False)
    provenance: Provenance = attr.ib(
        validator=attr.validators.instance_of(Provenance)
    )
    source: str = attr.ib(default='')

    def __attrs_post_init__(self):
        self.matrix = np.ascontiguousarray(self.matrix, dtype=np.float64)
        msg = 'basis matrix must be two-dimensional'
        assert self.matrix.ndim == 2, msg

        deviation = orthonormality_error(self.matrix)
        if deviation >= ORTHONORMALITY_TOL:
            raise NumericalError(
                f'basis {self.source!r} is not orthonormal '
                f'(max |V^T V - I| = {deviation:.3e})'
            )

        if self.singular_values is not None:
            self.singular_values = np.asarray(self.singular_values, dtype=np.float64)
            msg = 'one singular value per basis column'
            assert self.singular_values.shape == (self.r,), msg
            slack = 1e-12 * max(self.singular_values.max(initial=0), 1.0)
            msg = 'singular values must be non-increasing'
            assert np.all(np.diff(self.singular_values) <= slack), msg

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def r(self) -> int:
        return self.matrix.shape[1]

    def fingerprint(self) -> str:
        """Content hash of the basis matrix"""
        h = hashlib.sha256()
        h.update(np.asarray(self.matrix.shape, dtype='<u8').tobytes())
        h.update(self.matrix.astype('<f8').tobytes())
        return h.hexdigest()[:16]


def orthonormality_error(matrix: np.ndarray) -> float:
    """max |V^T V - I|"""
    r = matrix.shape[1]
    if r == 0:
        return 0.0
    return float(np.abs(matrix.T @ matrix - np.eye(r)).max())


def fix_signs(matrix: np.ndarray) -> np.ndarray:
    """Flip columns so that their largest-magnitude entry is positive"""
    idx = np.argmax(np.abs(matrix), axis=0)
    signs = np.sign(matrix[idx, np.arange(matrix.shape[1])])
    signs[signs == 0] = 1.0
    return matrix * signs


def numerical_rank(singular_values: np.ndarray, shape: Tuple[int, int]) -> int:
    if singular_values.size == 0 or singular_values[0] == 0:
        return 0
    tol = singular_values[0] * max(shape) * np.finfo(np.float64).eps
    return int(np.sum(singular_values > tol))


def _truncated_svd(
    matrix: np.ndarray, r: int, label: str, *, check_rank: bool = True
) -> Tuple[np.ndarray, np.ndarray]:
    n, m = matrix.shape
    if not 1 <= r <= min(n, m):
        raise ConfigError(
            f'order {r} must lie in [1, {min(n, m)}] for a {n} x {m} matrix'
        )
    U, S, _ = linalg.svd(matrix, full_matrices=False)
    if check_rank:
        rank = numerical_rank(S, matrix.shape)
        if r > rank:
            raise RankDeficiencyError(r, rank, label)
    return fix_signs(U[:, :r]), S[:r]


def local_basis(s: SnapshotSet, r: int) -> ReductionBasis:
    """Leading r left singular vectors of one snapshot matrix

    Raises:
        RankDeficiencyError: `r` exceeds the numerical rank of the snapshots.
    """
    V, S = _truncated_svd(s.displacements, int(r), s.label)
    return ReductionBasis(V, S, Provenance.LOCAL_SNAPSHOT, s.label)


def global_basis(
    snapshots: Sequence[SnapshotSet],
    r: int,
    *,
    source: str = 'domain',
    provenance: Provenance = Provenance.GLOBAL_DOMAIN,
) -> ReductionBasis:
    """Basis from the SVD of all snapshot matrices stacked side by side"""
    snapshots = list(snapshots)
    if not snapshots:
        raise ConfigError('a global basis needs at least one snapshot set')
    n = snapshots[0].n
    msg = 'all snapshot sets must share the same DOF count'
    assert all(s.n == n for s in snapshots), msg

    stacked = np.hstack([s.displacements for s in snapshots])
    V, S = _truncated_svd(stacked, int(r), source)
    return ReductionBasis(V, S, provenance, source)


def stack_and_compress(
    bases: Sequence,
    r_global: Optional[int] = None,
    *,
    provenance: Provenance = Provenance.GLOBAL_REGION,
    source: str = '',
) -> ReductionBasis:
    """SVD of column-concatenated bases, truncated to `r_global`

    Args:
        - bases: matrices, tangent vectors or reduction bases sharing n rows
        - r_global: retained columns; `None` keeps all `min(n, sum r_i)`

    Kwargs:
        - provenance: provenance recorded on the result
        - source: label recorded on the result

    Columns beyond the numerical rank of the stack are kept when requested,
    so an untruncated result always spans the inputs.
    """
    matrices = [np.asarray(getattr(b, 'matrix', b), dtype=np.float64) for b in bases]
    if not matrices:
        raise ConfigError('nothing to stack')
    n = matrices[0].shape[0]
    if any(m.ndim != 2 or m.shape[0] != n for m in matrices):
        raise ConfigError('stacked bases must all have the same number of rows')

    stacked = np.hstack(matrices)
    total = stacked.shape[1]
    if r_global is None:
        r_global = min(n, total)
    if int(r_global) > total:
        raise ConfigError(
            f'r_global = {r_global} exceeds the {total} stacked columns'
        )
    V, S = _truncated_svd(stacked, int(r_global), source, check_rank=False)
    return ReductionBasis(V, S, provenance, source)


def energy_order(singular_values: Sequence[float], fraction: float) -> int:
    """Smallest order capturing `fraction` of the snapshot energy sum(s_i^2)"""
    if not 0 < fraction <= 1:
        raise ConfigError(f'energy fraction must lie in (0, 1], got {fraction}')
    energy = np.asarray(singular_values, dtype=np.float64) ** 2
    if energy.sum() == 0:
        raise RankDeficiencyError(1, 0, 'energy truncation')
    captured = np.cumsum(energy) / energy.sum()
    # Guard against the final cumulative sum landing a hair below 1
    return int(min(np.searchsorted(captured, fraction - 1e-15) + 1, energy.size))


def projection_error(displacements: np.ndarray, basis: ReductionBasis) -> float:
    """Relative Frobenius error of projecting snapshots onto the basis"""
    D = np.asarray(displacements, dtype=np.float64)
    V = basis.matrix
    norm = linalg.norm(D)
    if norm == 0:
        raise ValueError('cannot measure projection error of a zero matrix')
    return float(linalg.norm(D - V @ (V.T @ D)) / norm)


@attr.s
class OrderSelection:
    """Outcome of an order sweep

    Args:
        order: selected reduction order
        satisfied: whether the thresholds were met
        table: one row per evaluated order (`order`, `re_u`, `re_sigma`,
            `passed`)
    """

    order: int = attr.ib()
    satisfied: bool = attr.ib()
    table: pd.DataFrame = attr.ib(repr=False)


def choose_order(
    s: SnapshotSet,
    err_threshold_u: float,
    err_threshold_sigma: Optional[float],
    evaluate: Callable[[ReductionBasis], Tuple[float, Optional[float]]],
    *,
    max_order: Optional[int] = None,
) -> OrderSelection:
    """Smallest order whose reduced run meets both error thresholds

    Args:
        - s: snapshots the candidate bases are built from
        - err_threshold_u: displacement error threshold in (0, 1]
        - err_threshold_sigma: stress error threshold in (0, 1], or `None` to
          ignore stresses
        - evaluate: runs the reduced model for a basis on the designated
          validation load and returns `(re_u, re_sigma)`

    Kwargs:
        - max_order: last order tried; defaults to the numerical rank

    Returns:
        OrderSelection. When no order meets the thresholds, the best order
        found (smallest worst-case threshold ratio) is returned with
        `satisfied=False`.
    """
    for name, value in (('u', err_threshold_u), ('sigma', err_threshold_sigma)):
        if value is not None and not 0 < value <= 1:
            raise ConfigError(f'threshold for {name} must lie in (0, 1], got {value}')

    S = linalg.svdvals(s.displacements)
    rank = numerical_rank(S, s.displacements.shape)
    last = rank if max_order is None else min(int(max_order), rank)
    if last < 1:
        raise RankDeficiencyError(1, rank, s.label)

    rows: List[dict] = []
    for r in range(1, last + 1):
        re_u, re_sigma = evaluate(local_basis(s, r))
        passed = re_u <= err_threshold_u and (
            err_threshold_sigma is None
            or (re_sigma is not None and re_sigma <= err_threshold_sigma)
        )
        rows.append(
            {'order': r, 're_u': re_u, 're_sigma': re_sigma, 'passed': passed}
        )
        logger.debug('order %d: re_u %.3e, re_sigma %s', r, re_u, re_sigma)
        if passed:
            return OrderSelection(r, True, pd.DataFrame(rows))

    table = pd.DataFrame(rows)
    worst = table['re_u'] / err_threshold_u
    if err_threshold_sigma is not None:
        sigma = table['re_sigma'].astype(float) / err_threshold_sigma
        worst = np.maximum(worst, sigma)
    best = int(table['order'].iloc[int(np.argmin(worst.to_numpy()))])
    logger.warning(
        'no order up to %d meets the thresholds (u %.3g, sigma %s); '
        'best achievable is %d',
        last,
        err_threshold_u,
        err_threshold_sigma,
        best,
    )
    return OrderSelection(best, False, table)
