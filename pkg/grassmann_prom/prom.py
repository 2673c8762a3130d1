"""
Parametric reduced-order models

Four variants serve a query point q:

- global: one basis from all training snapshots of the domain
- local: one basis from the training snapshots of the subdomain holding q
- entries: tangent matrices of the subdomain interpolated entry by entry
- coefficients: small coefficient matrices expressing every tangent matrix in
  the columns of the region's compressed tangent basis are interpolated, then
  mapped back through that basis

Interpolation always happens on the tangent space at the subdomain centroid;
the interpolated tangent is mapped back onto the manifold once.
"""
import logging
from typing import List, Optional, Sequence

import attr
import numpy as np
from scipy import linalg

from . import fem
from .ecsw import ElementForceEvaluator, HyperMesh
from .errors import ConfigError, IllConditionedError, NumericalError, OutOfDomainError
from .grassmann import TangentVector, combine, exp_map, log_map
from .newmark import DynamicSystem, ResponseHistory
from .param_space import ParameterPoint, Subdomain, interpolation_weights
from .pod import (
    Provenance,
    ReductionBasis,
    SnapshotSet,
    global_basis,
    local_basis,
    stack_and_compress,
)

logger = logging.getLogger(__name__)


@attr.s
class OperationCounter:
    """Multiply-add count of the online interpolation step"""

    interpolation: int = attr.ib(default=0)
    queries: int = attr.ib(default=0)

    def add(self, count: int) -> None:
        self.interpolation += int(count)
        self.queries += 1


class ReducedSystem(DynamicSystem):
    """Galerkin projection of the structural model onto a basis

    Args:
        basis: reduction basis, n x r
        model: the full structural model at the query point
        mesh: hyper mesh bound to `basis`; the full mesh is used when omitted
        substeps: RK4 sub-steps of the link update
    """

    def __init__(
        self,
        basis: ReductionBasis,
        model: fem.StructuralModel,
        mesh: Optional[HyperMesh] = None,
        substeps: int = 1,
    ):
        msg = f'basis has {basis.n} rows, model has {model.n} DOFs'
        assert basis.n == model.n, msg

        V = basis.matrix
        self.basis = basis
        self.model = model
        self.substeps = int(substeps)
        self._mass = V.T @ model.mass @ V
        self._damping = V.T @ model.damping @ V
        try:
            linalg.cholesky(self._mass)
        except linalg.LinAlgError:
            raise NumericalError(
                f'reduced mass of basis {basis.source!r} is not positive definite'
            )
        self.forces = ElementForceEvaluator(basis, model, mesh, self.substeps)

    @property
    def mass(self):
        return self._mass

    @property
    def damping(self):
        return self._damping

    @property
    def load_dim(self):
        return self.basis.n

    @property
    def mesh(self) -> HyperMesh:
        return self.forces.mesh

    @property
    def element_evaluations(self) -> int:
        return self.forces.element_evaluations

    def initial_state(self):
        return self.forces.initial_state()

    def internal_force(self, q_prev, q, state):
        return self.forces.step(q_prev, q, state)

    def project_loads(self, samples):
        return samples @ self.basis.matrix

    def expand(self, history: ResponseHistory) -> np.ndarray:
        """T x n nodal displacements of a reduced response"""
        return history.displacements @ self.basis.matrix.T

    def hyper_reduced(self, mesh: HyperMesh) -> 'ReducedSystem':
        """Same projection with the nonlinear force sampled on `mesh`"""
        return ReducedSystem(self.basis, self.model, mesh, self.substeps)


@attr.s
class GlobalModel:
    """Domain-wide basis served to every query point"""

    basis: ReductionBasis = attr.ib()


@attr.s
class RegionModel:
    """Offline data of one subdomain

    Args:
        subdomain: the subdomain
        reference_basis: local basis at the centroid
        local_bases: local bases at every training point
        tangent_locals: local bases mapped to the tangent space at the centroid
        global_region_basis: compressed basis of the stacked tangent matrices
        coeff_matrices: coefficient matrices, one per training point
        local_region_basis: POD basis of all snapshots of the subdomain
        hyper_mesh: hyper mesh trained against the reference basis
    """

    subdomain: Subdomain = attr.ib()
    reference_basis: ReductionBasis = attr.ib(repr=False)
    local_bases: List[ReductionBasis] = attr.ib(repr=False)
    tangent_locals: List[TangentVector] = attr.ib(repr=False)
    global_region_basis: ReductionBasis = attr.ib(repr=False)
    coeff_matrices: List[np.ndarray] = attr.ib(repr=False)
    local_region_basis: ReductionBasis = attr.ib(repr=False)
    hyper_mesh: Optional[HyperMesh] = attr.ib(default=None, repr=False)

    def __attrs_post_init__(self):
        k = len(self.subdomain.training_points)
        msg = f'expected {k} entries per training point'
        assert len(self.tangent_locals) == k and len(self.coeff_matrices) == k, msg

    @property
    def label(self) -> str:
        return self.subdomain.label()

    @property
    def untruncated(self) -> bool:
        n, r = self.reference_basis.matrix.shape
        return self.global_region_basis.r == min(n, r * len(self.tangent_locals))

    def coefficient_residuals(self) -> np.ndarray:
        """`||G_i - Vg Xi_i||_F / ||G_i||_F` per training point (0 for G_i = 0)"""
        Vg = self.global_region_basis.matrix
        residuals = []
        for g, xi in zip(self.tangent_locals, self.coeff_matrices):
            norm = linalg.norm(g.matrix)
            if norm == 0:
                residuals.append(0.0)
                continue
            residuals.append(linalg.norm(g.matrix - Vg @ xi) / norm)
        return np.array(residuals)


def build_global(
    all_snapshots: Sequence[SnapshotSet], r: int, *, label: str = 'domain'
) -> GlobalModel:
    """One basis from the SVD of all stacked snapshot matrices"""
    basis = global_basis(all_snapshots, r, source=label)
    logger.info('global basis: order %d from %d snapshot sets', r, len(all_snapshots))
    return GlobalModel(basis)


def build_region(
    sub: Subdomain,
    training_snapshots: Sequence[SnapshotSet],
    r_local: int,
    r_global: Optional[int] = None,
) -> RegionModel:
    """Offline construction of a subdomain model

    Args:
        - sub: the subdomain
        - training_snapshots: one snapshot set per training point, ordered as
          `sub.training_points`
        - r_local: order of every local basis
        - r_global: columns kept in the compressed tangent basis; `None` keeps
          all of them

    Returns:
        RegionModel with coefficient matrices `Xi_i = Vg^T G_i`.

    Raises:
        IllConditionedError: a training basis is too far from the centroid
        basis; the error names the subdomain.
    """
    training_snapshots = list(training_snapshots)
    msg = (
        f'subdomain {sub.index} has {len(sub.training_points)} training points, '
        f'got {len(training_snapshots)} snapshot sets'
    )
    assert len(training_snapshots) == len(sub.training_points), msg

    label = sub.label()
    local = [local_basis(s, r_local) for s in training_snapshots]
    reference = local[sub.reference_index]

    tangents = []
    for basis in local:
        try:
            tangents.append(log_map(reference, basis))
        except IllConditionedError as err:
            raise IllConditionedError(
                f'{label}:{err.pair[0]}', f'{label}:{err.pair[1]}', err.condition
            ) from err

    compressed = stack_and_compress(tangents, r_global, source=label)
    Vg = compressed.matrix
    coefficients = [Vg.T @ g.matrix for g in tangents]

    region_basis = global_basis(
        training_snapshots, r_local, source=label, provenance=Provenance.GLOBAL_REGION
    )

    logger.info(
        '%s: %d training points, local order %d, region basis %d columns',
        label,
        len(local),
        r_local,
        compressed.r,
    )
    return RegionModel(
        sub,
        reference,
        local,
        tangents,
        compressed,
        coefficients,
        region_basis,
    )


def _weights(region: RegionModel, q: ParameterPoint) -> np.ndarray:
    if not region.subdomain.contains(q):
        raise OutOfDomainError(
            f'point {q.coords} lies outside subdomain {region.subdomain.index}'
        )
    return interpolation_weights(region.subdomain, q)


def interpolate_coefficients(
    region: RegionModel,
    q: ParameterPoint,
    counter: Optional[OperationCounter] = None,
) -> ReductionBasis:
    """Basis at q from interpolated coefficient matrices"""
    weights = _weights(region, q)
    xi = np.zeros_like(region.coeff_matrices[0])
    for w, xi_i in zip(weights, region.coeff_matrices):
        xi += w * xi_i
    if counter is not None:
        counter.add(xi.size * len(weights))

    gamma = TangentVector(
        region.global_region_basis.matrix @ xi,
        region.reference_basis.fingerprint(),
        q.key(),
    )
    return exp_map(region.reference_basis, gamma)


def interpolate_entries(
    region: RegionModel,
    q: ParameterPoint,
    counter: Optional[OperationCounter] = None,
) -> ReductionBasis:
    """Basis at q from entry-wise interpolated tangent matrices"""
    weights = _weights(region, q)
    gamma = combine(region.tangent_locals, weights, q.key())
    if counter is not None:
        counter.add(gamma.matrix.size * len(weights))
    return exp_map(region.reference_basis, gamma)


def query_coefficients(
    region: RegionModel,
    q: ParameterPoint,
    model: fem.StructuralModel,
    *,
    counter: Optional[OperationCounter] = None,
    substeps: int = 1,
) -> ReducedSystem:
    """Reduced system at q by coefficient-matrix interpolation"""
    basis = interpolate_coefficients(region, q, counter)
    return ReducedSystem(basis, model, substeps=substeps)


def query_entries(
    region: RegionModel,
    q: ParameterPoint,
    model: fem.StructuralModel,
    *,
    counter: Optional[OperationCounter] = None,
    substeps: int = 1,
) -> ReducedSystem:
    """Reduced system at q by entry-wise tangent interpolation"""
    basis = interpolate_entries(region, q, counter)
    return ReducedSystem(basis, model, substeps=substeps)


def query_local(
    region: RegionModel,
    q: ParameterPoint,
    model: fem.StructuralModel,
    *,
    substeps: int = 1,
) -> ReducedSystem:
    """Reduced system at q with the subdomain's own POD basis"""
    _weights(region, q)
    return ReducedSystem(region.local_region_basis, model, substeps=substeps)


def query_global(
    global_model: GlobalModel,
    q: ParameterPoint,
    model: fem.StructuralModel,
    *,
    substeps: int = 1,
) -> ReducedSystem:
    """Reduced system at q with the domain-wide basis"""
    return ReducedSystem(global_model.basis, model, substeps=substeps)


def query(
    variant: str,
    source,
    q: ParameterPoint,
    model: fem.StructuralModel,
    *,
    counter: Optional[OperationCounter] = None,
    substeps: int = 1,
) -> ReducedSystem:
    """Dispatch a query to one of the four variants

    `source` is a GlobalModel for the `'global'` variant and the RegionModel of
    the subdomain holding q otherwise.
    """
    if variant == 'global':
        return query_global(source, q, model, substeps=substeps)
    if variant == 'local':
        return query_local(source, q, model, substeps=substeps)
    if variant == 'entries':
        return query_entries(source, q, model, counter=counter, substeps=substeps)
    if variant == 'coefficients':
        return query_coefficients(source, q, model, counter=counter, substeps=substeps)
    raise ConfigError(f'unknown variant {variant!r}')
