"""
Logarithm and exponential maps on the Grassmann manifold

Subspaces are represented by orthonormal bases; bases differing by a right
orthogonal factor represent the same point. Tangent vectors at a reference
basis `V0` are n x r matrices `G` with `V0^T G = 0`.

Ref:
https://en.wikipedia.org/wiki/Grassmannian
"""
from typing import Sequence

import attr
import numpy as np
from scipy import linalg

from .constants import LOG_MAP_COND_LIMIT
from .errors import IllConditionedError
from .pod import Provenance, ReductionBasis

# Horizontal-space condition ||V0^T G||_max
TANGENT_TOL = 1e-8


@attr.s
class TangentVector:
    """Point of the tangent space at a reference basis

    Args:
        matrix: n x r tangent matrix
        reference_id: fingerprint of the reference basis
        source: label of the basis that was mapped
    """

    matrix: np.ndarray = attr.ib(
        converter=lambda x: np.asarray(x, dtype=np.float64), repr=False
    )
    reference_id: str = attr.ib()
    source: str = attr.ib(default='')

    @property
    def shape(self):
        return self.matrix.shape

    def is_tangent_to(self, v0: ReductionBasis, tol: float = TANGENT_TOL) -> bool:
        if self.reference_id != v0.fingerprint():
            return False
        return bool(np.abs(v0.matrix.T @ self.matrix).max(initial=0) < tol)

    def scaled(self, t: float) -> 'TangentVector':
        return attr.evolve(self, matrix=t * self.matrix)


def combine(
    tangents: Sequence[TangentVector], weights: Sequence[float], source: str = ''
) -> TangentVector:
    """Weighted sum of tangent vectors sharing a reference basis"""
    tangents = list(tangents)
    weights = np.asarray(weights, dtype=np.float64)
    msg = 'one weight per tangent vector'
    assert len(tangents) == weights.shape[0] and tangents, msg
    msg = 'tangent vectors live at different reference bases'
    assert len({t.reference_id for t in tangents}) == 1, msg

    matrix = np.zeros_like(tangents[0].matrix)
    for w, t in zip(weights, tangents):
        matrix += w * t.matrix
    return TangentVector(matrix, tangents[0].reference_id, source)


def log_map(
    v0: ReductionBasis, vi: ReductionBasis, *, cond_limit: float = LOG_MAP_COND_LIMIT
) -> TangentVector:
    """Map `vi` onto the tangent space at `v0`

    Args:
        - v0: reference basis
        - vi: basis to map, same shape as `v0`

    Kwargs:
        - cond_limit: largest condition number of `V0^T Vi` accepted

    Returns:
        TangentVector `P atan(S) Q^T`, where `P S Q^T` is the thin SVD of
        `(Vi - V0 V0^T Vi)(V0^T Vi)^-1`.

    Raises:
        IllConditionedError: the two subspaces are (nearly) orthogonal in some
        direction, so `V0^T Vi` cannot be inverted reliably.
    """
    V0 = v0.matrix
    Vi = vi.matrix
    msg = f'bases must share their shape, got {V0.shape} and {Vi.shape}'
    assert V0.shape == Vi.shape, msg

    overlap = V0.T @ Vi
    condition = np.linalg.cond(overlap)
    if not np.isfinite(condition) or condition > cond_limit:
        raise IllConditionedError(v0.source, vi.source, condition)

    # L = (Vi - V0 V0^T Vi)(V0^T Vi)^-1, via a solve on the transposed system
    residual = Vi - V0 @ overlap
    L = linalg.solve(overlap.T, residual.T).T

    P, S, Qt = linalg.svd(L, full_matrices=False)
    gamma = (P * np.arctan(S)) @ Qt
    return TangentVector(gamma, v0.fingerprint(), vi.source)


def exp_map(
    v0: ReductionBasis, g: TangentVector, *, source: str = ''
) -> ReductionBasis:
    """Map a tangent vector at `v0` back onto the manifold

    With the thin SVD `G = P S Q^T`, returns an orthonormal basis of
    `V0 Q cos(S) Q^T + P sin(S) Q^T`, re-orthonormalized by a thin QR whose
    column signs follow the diagonal of R.
    """
    V0 = v0.matrix
    msg = f'tangent shape {g.shape} does not match basis shape {V0.shape}'
    assert g.shape == V0.shape, msg

    P, S, Qt = linalg.svd(g.matrix, full_matrices=False)
    V = (V0 @ Qt.T * np.cos(S)) @ Qt + (P * np.sin(S)) @ Qt

    Q, R = linalg.qr(V, mode='economic')
    signs = np.sign(np.diag(R))
    signs[signs == 0] = 1.0
    return ReductionBasis(Q * signs, None, Provenance.INTERPOLATED, source or g.source)


def principal_angles(a, b) -> np.ndarray:
    """Principal angles between two subspaces, largest first"""
    A = np.asarray(getattr(a, 'matrix', a))
    B = np.asarray(getattr(b, 'matrix', b))
    return linalg.subspace_angles(A, B)


def largest_principal_angle(a, b) -> float:
    """Largest principal angle between the spans of two bases (radians)"""
    return float(principal_angles(a, b)[0])
