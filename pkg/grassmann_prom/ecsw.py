"""
Energy-conserving sampling and weighting (ECSW) hyper-reduction

The elements are the hysteretic links. For a reduction basis V, the reduced
contribution of link e is `(B_e V)^T s_e`, with `s_e = k_link A z_e` its force
and `B_e` its row of the link incidence matrix. Training selects a sparse set of
links and non-negative weights so that the weighted sum reproduces the total
reduced link force on training snapshots to a relative tolerance `tau`.

The linear skeleton is projected exactly (`V^T K V`) and never sampled.
"""
import logging
from typing import Optional, Sequence

import attr
import numpy as np
from scipy import linalg

from . import fem
from .constants import ECSW_STRIDE, ECSW_TAU
from .errors import ArtifactError, BasisMismatchError, ConfigError
from .pod import ReductionBasis, SnapshotSet

logger = logging.getLogger(__name__)

SCOPES = ('subdomain', 'query')


def _tau(instance, attribute, value):
    if not 0 < value <= 1:
        raise ConfigError(f'tau must lie in (0, 1], got {value}')


@attr.s
class EcswTraining:
    """Projected element contributions on training configurations

    Args:
        G: (n_s r) x n_e matrix; rows stack the r reduced components of every
            training configuration, columns are elements
        b: row sums `G 1`
        tau: relative residual tolerance
        basis_fingerprint: fingerprint of the basis used for the projection
        samples: number of training configurations n_s
    """

    G: np.ndarray = attr.ib(repr=False)
    b: np.ndarray = attr.ib(repr=False)
    tau: float = attr.ib(converter=float, validator=_tau)
    basis_fingerprint: str = attr.ib(default='')
    samples: int = attr.ib(default=0)

    def __attrs_post_init__(self):
        msg = 'b must have one entry per row of G'
        assert self.G.ndim == 2 and self.b.shape == (self.G.shape[0],), msg

    @property
    def n_elements(self) -> int:
        return self.G.shape[1]


@attr.s
class HyperMesh:
    """Sampled elements and their weights

    Args:
        selected: element ids, increasing
        weights: strictly positive weight per selected element
        tau: tolerance the mesh was trained for
        residual: achieved relative residual `||G xi - b|| / ||b||`
        converged: whether `residual <= tau`
        basis_fingerprint: basis the mesh is bound to
        n_elements: element count of the full mesh
    """

    selected: np.ndarray = attr.ib(
        converter=lambda x: np.asarray(x, dtype=np.int64).reshape(-1)
    )
    weights: np.ndarray = attr.ib(
        converter=lambda x: np.asarray(x, dtype=np.float64).reshape(-1)
    )
    tau: float = attr.ib(converter=float, validator=_tau)
    residual: float = attr.ib(converter=float)
    converged: bool = attr.ib(converter=bool)
    basis_fingerprint: str = attr.ib()
    n_elements: int = attr.ib(converter=int)

    def __attrs_post_init__(self):
        msg = 'one weight per selected element'
        assert self.selected.shape == self.weights.shape, msg
        msg = 'hyper mesh weights must be strictly positive'
        assert np.all(self.weights > 0), msg
        msg = 'selected element ids out of range'
        assert np.all((self.selected >= 0) & (self.selected < self.n_elements)), msg

    @property
    def size(self) -> int:
        return int(self.selected.shape[0])

    @classmethod
    def full(cls, basis: ReductionBasis, n_elements: int) -> 'HyperMesh':
        """Every element with unit weight"""
        return cls(
            np.arange(n_elements),
            np.ones(n_elements),
            1.0,
            0.0,
            True,
            basis.fingerprint(),
            n_elements,
        )

    def retarget(self, basis: ReductionBasis) -> 'HyperMesh':
        """Rebind the sampled elements and weights to another basis"""
        return attr.evolve(self, basis_fingerprint=basis.fingerprint())

    def to_dict(self) -> dict:
        return {
            'selected': self.selected.tolist(),
            'weights': self.weights.tolist(),
            'tau': self.tau,
            'residual': self.residual,
            'converged': self.converged,
            'basis_fingerprint': self.basis_fingerprint,
            'n_elements': self.n_elements,
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'HyperMesh':
        return cls(**data)


def assemble_training(
    snapshots: Sequence[SnapshotSet],
    basis: ReductionBasis,
    model: fem.StructuralModel,
    *,
    stride: int = ECSW_STRIDE,
    tau: float = ECSW_TAU,
) -> EcswTraining:
    """Build the ECSW training system from snapshot link forces

    Every `stride`-th time sample of every snapshot set is a training
    configuration contributing r rows.

    Raises:
        ArtifactError: a snapshot set carries no link force records.
    """
    if int(stride) < 1:
        raise ConfigError(f'stride must be >= 1, got {stride}')
    msg = 'basis and model disagree on the DOF count'
    assert basis.n == model.n, msg

    BV = model.link_matrix @ basis.matrix
    blocks = []
    for s in snapshots:
        if s.link_forces is None:
            raise ArtifactError(
                f'snapshot set {s.label!r} has no element force records'
            )
        msg = f'snapshot set {s.label!r} has the wrong number of elements'
        assert s.link_forces.shape[1] == model.n_elements, msg
        for t in range(0, s.steps, int(stride)):
            # Column e holds (B_e V)^T s_e
            blocks.append(BV.T * s.link_forces[t][None, :])
    if not blocks:
        raise ArtifactError('no training configurations available')

    G = np.vstack(blocks)
    b = G @ np.ones(G.shape[1])
    return EcswTraining(G, b, tau, basis.fingerprint(), len(blocks))


def project_record(
    record: fem.ElementForceRecord, model: fem.StructuralModel, basis: ReductionBasis
) -> np.ndarray:
    """Reduced contribution `V_e^T g_e` of one element force record"""
    position = {g: i for i, g in enumerate(model.free_dofs)}
    contribution = np.zeros(basis.r)
    for dof, force in zip(record.dofs, record.force):
        if dof in position:
            contribution += basis.matrix[position[dof]] * force
    return contribution


def solve_sparse_nnls(
    t: EcswTraining, *, max_iterations: Optional[int] = None
) -> HyperMesh:
    """Greedy active-set sparse NNLS

    Starting from the empty set, the element with the largest positive
    gradient of `0.5 ||G xi - b||^2` joins the active set, the unconstrained
    least-squares problem is solved on the active set, and variables driven
    non-positive are removed (Lawson-Hanson inner loop). Iteration stops as
    soon as `||G xi - b|| <= tau ||b||`.

    Returns:
        HyperMesh. When the tolerance cannot be met (no improving element left,
        or the iteration budget of `3 n_e` is spent) the best weights are
        returned with `converged=False`.
    """
    G = t.G
    b = t.b
    n_e = G.shape[1]
    if max_iterations is None:
        max_iterations = 3 * n_e

    b_norm = linalg.norm(b)
    target = t.tau * b_norm
    gradient_tol = 10 * np.finfo(np.float64).eps * max(linalg.norm(G, 1), 1.0)

    xi = np.zeros(n_e)
    active = np.zeros(n_e, dtype=bool)
    rejected = np.zeros(n_e, dtype=bool)
    residual = b.copy()
    iterations = 0

    while linalg.norm(residual) > target and iterations < max_iterations:
        iterations += 1
        gradient = G.T @ residual
        gradient[active | rejected] = -np.inf
        j = int(np.argmax(gradient))
        if not gradient[j] > gradient_tol * linalg.norm(residual):
            break
        active[j] = True

        for _ in range(3 * n_e):
            z = np.zeros(n_e)
            z[active] = linalg.lstsq(G[:, active], b)[0]
            if np.all(z[active] > 0):
                xi = z
                break

            violated = active & (z <= 0)
            if not np.any(xi[violated] > 0):
                # The entering element cannot carry positive weight
                active[j] = False
                rejected[j] = True
                break
            ratios = xi[violated] / (xi[violated] - z[violated])
            alpha = np.min(ratios[xi[violated] > 0])
            xi = xi + alpha * (z - xi)
            active &= xi > 0
            xi[~active] = 0.0

        new_residual = b - G @ xi
        if not rejected[j]:
            rejected[:] = False
        residual = new_residual

    achieved = linalg.norm(residual)
    relative = achieved / b_norm if b_norm > 0 else 0.0
    converged = achieved <= target
    if not converged:
        logger.warning(
            'sparse NNLS stagnated with relative residual %.3e above tau %.3e '
            '(%d of %d elements selected)',
            relative,
            t.tau,
            int(np.count_nonzero(xi > 0)),
            n_e,
        )

    selected = np.flatnonzero(xi > 0)
    logger.info(
        'hyper mesh: %d of %d elements, relative residual %.3e',
        selected.size,
        n_e,
        relative,
    )
    return HyperMesh(
        selected,
        xi[selected],
        t.tau,
        relative,
        converged,
        t.basis_fingerprint,
        n_e,
    )


class ElementForceEvaluator:
    """Reduced internal force summed over a weighted set of links

    Holds the exactly projected linear stiffness and the projected incidence
    rows of the evaluated links; only those links carry internal states.
    """

    def __init__(
        self,
        basis: ReductionBasis,
        model: fem.StructuralModel,
        mesh: Optional[HyperMesh] = None,
        substeps: int = 1,
    ):
        if mesh is None:
            mesh = HyperMesh.full(basis, model.n_elements)
        if mesh.basis_fingerprint != basis.fingerprint():
            raise BasisMismatchError(mesh.basis_fingerprint, basis.fingerprint())
        msg = 'hyper mesh does not match the model'
        assert mesh.n_elements == model.n_elements, msg

        V = basis.matrix
        self.mesh = mesh
        self.substeps = int(substeps)
        self.stiffness = V.T @ model.linear_stiffness @ V
        self.incidence = (model.link_matrix @ V)[mesh.selected]
        self.links = model.link_set.subset(mesh.selected)
        self.weighted_scale = mesh.weights * self.links.force_scale
        self.element_evaluations = 0

    def initial_state(self) -> np.ndarray:
        return np.zeros(self.mesh.size)

    def force(self, q: np.ndarray, z: np.ndarray) -> np.ndarray:
        return self.stiffness @ q + self.incidence.T @ (self.weighted_scale * z)

    def step(self, q_prev: np.ndarray, q: np.ndarray, z: np.ndarray):
        if not self.mesh.size:
            return self.stiffness @ q, self.stiffness, z

        P = self.incidence
        delta = P @ (q - q_prev)
        z_new, dz_ddelta, _ = fem.advance_links(self.links, z, delta, self.substeps)
        self.element_evaluations += self.mesh.size

        force = self.stiffness @ q + P.T @ (self.weighted_scale * z_new)
        stiffening = (self.weighted_scale * dz_ddelta)[:, None] * P
        tangent = self.stiffness + P.T @ stiffening
        return force, tangent, z_new


def hyper_force(
    mesh: HyperMesh,
    basis: ReductionBasis,
    model: fem.StructuralModel,
    u_r: np.ndarray,
    z: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Reduced internal force evaluated on the sampled elements only

    Args:
        - mesh: hyper mesh bound to `basis`
        - basis: reduction basis
        - model: full structural model
        - u_r: reduced coordinates
        - z: states of the selected links (virgin state by default)

    Raises:
        BasisMismatchError: the mesh is bound to another basis.
    """
    evaluator = ElementForceEvaluator(basis, model, mesh)
    if z is None:
        z = evaluator.initial_state()
    msg = 'one link state per selected element'
    assert np.shape(z) == (mesh.size,), msg
    return evaluator.force(np.asarray(u_r, dtype=np.float64), z)
