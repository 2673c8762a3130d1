"""
High-fidelity structural model: shear chain with Bouc-Wen hysteretic links

Each link contributes the hysteretic force `k_link * A * z` acting on the
relative displacement `x = u[dof_j] - u[dof_i]`, where the internal variable `z`
follows the Bouc-Wen law

    dz/dt = A dx/dt - beta |dx/dt| z |z|^(w-1) - gamma dx/dt |z|^w

With the link velocity held constant over a structural time step, the law is a
function of the displacement increment only, `dz/dx = A - s beta z |z|^(w-1) -
gamma |z|^w` with `s = sign(dx/dt)`, which is what the step kernel integrates.

Ref:
https://en.wikipedia.org/wiki/Bouc%E2%80%93Wen_model_of_hysteresis
"""
from typing import Iterator, Optional, Sequence, Tuple, Union

import attr
import numpy as np
from scipy import linalg

from .errors import ConfigError

GROUND = 0


def _positive(instance, attribute, value):
    if not value > 0:
        raise ConfigError(f'{attribute.name} must be positive, got {value}')


def _non_negative(instance, attribute, value):
    if not value >= 0:
        raise ConfigError(f'{attribute.name} must be non-negative, got {value}')


def _at_least_one(instance, attribute, value):
    if not value >= 1:
        raise ConfigError(f'{attribute.name} must be >= 1, got {value}')


@attr.s(frozen=True)
class BoucWenLink:
    """Hysteretic link between two nodes

    Args:
        dof_i: first node (global DOF id), usually the lower story or ground
        dof_j: second node (global DOF id)
        k_link: elastic link stiffness (N/m)
        A: amplitude parameter
        beta: shape parameter
        gamma: shape parameter
        w: exponent controlling the sharpness of the transition, >= 1

    The saturation value `z_max = (A / (beta + gamma)) ** (1 / w)` is derived;
    `beta = gamma = 0` gives a linear link with unbounded `z`.
    """

    dof_i: int = attr.ib(converter=int)
    dof_j: int = attr.ib(converter=int)
    k_link: float = attr.ib(converter=float, validator=_positive)
    A: float = attr.ib(converter=float, validator=_positive)
    beta: float = attr.ib(converter=float, validator=_non_negative)
    gamma: float = attr.ib(converter=float, validator=_non_negative)
    w: float = attr.ib(default=1.0, converter=float, validator=_at_least_one)
    z_max: float = attr.ib(init=False)

    def __attrs_post_init__(self):
        if self.dof_i == self.dof_j:
            raise ConfigError(f'link connects node {self.dof_i} to itself')
        total = self.beta + self.gamma
        z_max = (self.A / total) ** (1 / self.w) if total > 0 else np.inf
        object.__setattr__(self, 'z_max', z_max)

    @classmethod
    def from_amplitude(
        cls,
        dof_i: int,
        dof_j: int,
        k_link: float,
        A: float,
        z_max: float,
        w: float = 1.0,
    ) -> 'BoucWenLink':
        """Build a link from its (A, z_max) parameterization, splitting
        `beta + gamma = A / z_max ** w` equally between the two shape
        parameters
        """
        if not z_max > 0:
            raise ConfigError(f'z_max must be positive, got {z_max}')
        half = A / (2 * z_max**w)
        return cls(dof_i, dof_j, k_link, A, half, half, w)


@attr.s(frozen=True)
class ElementForceRecord:
    """Force contribution of one link at one time index

    Args:
        element: position of the link in `StructuralModel.links`
        step: time index
        dofs: global DOF ids the link acts on, `(dof_i, dof_j)`
        force: nodal forces on `dofs`
    """

    element: int = attr.ib()
    step: int = attr.ib()
    dofs: Tuple[int, ...] = attr.ib(converter=tuple)
    force: np.ndarray = attr.ib(converter=np.asarray)

    def __attrs_post_init__(self):
        msg = 'force must have one entry per element DOF'
        assert self.force.shape == (len(self.dofs),), msg


@attr.s(frozen=True)
class LinkSet:
    """Link parameters as arrays, one entry per link"""

    stiffness: np.ndarray = attr.ib(repr=False)
    amplitude: np.ndarray = attr.ib(repr=False)
    beta: np.ndarray = attr.ib(repr=False)
    gamma: np.ndarray = attr.ib(repr=False)
    exponent: np.ndarray = attr.ib(repr=False)
    z_max: np.ndarray = attr.ib(repr=False)

    @classmethod
    def from_links(cls, links: Sequence[BoucWenLink]) -> 'LinkSet':
        return cls(
            np.array([link.k_link for link in links]),
            np.array([link.A for link in links]),
            np.array([link.beta for link in links]),
            np.array([link.gamma for link in links]),
            np.array([link.w for link in links]),
            np.array([link.z_max for link in links]),
        )

    def __len__(self) -> int:
        return self.stiffness.shape[0]

    @property
    def force_scale(self) -> np.ndarray:
        return self.stiffness * self.amplitude

    def subset(self, indices) -> 'LinkSet':
        indices = np.asarray(indices, dtype=np.int64)
        return LinkSet(*(getattr(self, a.name)[indices] for a in attr.fields(LinkSet)))


def _as_matrix(value) -> np.ndarray:
    return np.array(value, dtype=np.float64, ndmin=2)


@attr.s
class StructuralModel:
    """Assembled model on the free DOFs

    Args:
        mass: n x n symmetric positive definite mass matrix
        damping: n x n damping matrix
        linear_stiffness: n x n symmetric positive semi-definite stiffness
        links: Bouc-Wen links, referencing global DOF ids
        constrained_dofs: global DOF ids removed from the system

    Global DOF ids run over free and constrained DOFs together; the free DOFs
    keep their relative order.
    """

    mass: np.ndarray = attr.ib(converter=_as_matrix, repr=False)
    damping: np.ndarray = attr.ib(converter=_as_matrix, repr=False)
    linear_stiffness: np.ndarray = attr.ib(converter=_as_matrix, repr=False)
    links: Tuple[BoucWenLink, ...] = attr.ib(converter=tuple, factory=tuple)
    constrained_dofs: Tuple[int, ...] = attr.ib(converter=tuple, factory=tuple)
    metadata: dict = attr.ib(factory=dict, repr=False)

    n: int = attr.ib(init=False)
    free_dofs: Tuple[int, ...] = attr.ib(init=False, repr=False)
    link_matrix: np.ndarray = attr.ib(init=False, repr=False)
    link_set: 'LinkSet' = attr.ib(init=False, repr=False)

    def __attrs_post_init__(self):
        n = self.mass.shape[0]
        for name in ('mass', 'damping', 'linear_stiffness'):
            msg = f'{name} must be a square {n} x {n} matrix'
            assert getattr(self, name).shape == (n, n), msg

        if not _symmetric(self.mass):
            raise ConfigError('mass matrix is not symmetric')
        try:
            linalg.cholesky(self.mass)
        except linalg.LinAlgError:
            raise ConfigError('mass matrix is not positive definite')

        K = self.linear_stiffness
        if not _symmetric(K):
            raise ConfigError('linear stiffness matrix is not symmetric')
        if n and linalg.eigvalsh(K)[0] < -1e-10 * _scale(K):
            raise ConfigError('linear stiffness is not positive semi-definite')

        self.n = n
        n_total = n + len(self.constrained_dofs)
        constrained = set(self.constrained_dofs)
        duplicated = len(constrained) != len(self.constrained_dofs)
        if duplicated or not constrained <= set(range(n_total)):
            raise ConfigError(f'invalid constrained DOFs {self.constrained_dofs}')
        self.free_dofs = tuple(g for g in range(n_total) if g not in constrained)
        position = {g: i for i, g in enumerate(self.free_dofs)}

        B = np.zeros((len(self.links), n))
        for e, link in enumerate(self.links):
            for dof in (link.dof_i, link.dof_j):
                if not 0 <= dof < n_total:
                    raise ConfigError(f'link {e} references unknown DOF {dof}')
            if link.dof_i in constrained and link.dof_j in constrained:
                raise ConfigError(f'link {e} connects two constrained DOFs')
            if link.dof_j in position:
                B[e, position[link.dof_j]] += 1.0
            if link.dof_i in position:
                B[e, position[link.dof_i]] -= 1.0
        self.link_matrix = B

        self.link_set = LinkSet.from_links(self.links)

    @property
    def n_elements(self) -> int:
        return len(self.links)

    @property
    def link_force_scale(self) -> np.ndarray:
        """Per-link factor `k_link * A` mapping z to the link force"""
        return self.link_set.force_scale

    def initial_link_state(self) -> np.ndarray:
        return np.zeros(self.n_elements)

    def link_deformation(self, u: np.ndarray) -> np.ndarray:
        return self.link_matrix @ u


def _scale(matrix: np.ndarray) -> float:
    return float(np.max(np.abs(matrix))) if matrix.size else 1.0


def _symmetric(matrix: np.ndarray) -> bool:
    return np.allclose(matrix, matrix.T, rtol=0, atol=1e-12 * _scale(matrix))


def _per_story(value, stories: int, name: str) -> np.ndarray:
    values = np.broadcast_to(np.asarray(value, dtype=np.float64), (stories,))
    if not np.all(values > 0):
        raise ConfigError(f'{name} must be positive, got {value}')
    return values.copy()


@attr.s(frozen=True)
class LinkParams:
    """Per-story link parameters in the (A, z_max) parameterization"""

    k_link: float = attr.ib(converter=float, validator=_positive)
    A: float = attr.ib(converter=float, validator=_positive)
    z_max: float = attr.ib(converter=float, validator=_positive)
    w: float = attr.ib(default=1.0, converter=float, validator=_at_least_one)


def build_shear_frame(
    stories: int,
    story_mass: Union[float, Sequence[float]],
    story_stiffness: Union[float, Sequence[float]],
    damping_ratio: float,
    link_params: Union[LinkParams, Sequence[LinkParams]],
) -> StructuralModel:
    """Shear chain with one Bouc-Wen link per story

    Node 0 is the (constrained) ground; node `i` is story `i`. Damping is mass
    proportional, `C = a0 M`, with `a0 = 2 zeta omega_1` so that the first mode
    of the linear skeleton carries the requested ratio.

    Args:
        - stories: number of stories, >= 1
        - story_mass: mass per story (kg), scalar or one value per story
        - story_stiffness: inter-story stiffness (N/m), scalar or per story
        - damping_ratio: modal damping ratio of the first mode, > 0
        - link_params: one `LinkParams` shared by all stories or one per story

    Returns:
        StructuralModel with `stories` free DOFs and `stories` links.
    """
    if int(stories) != stories or stories < 1:
        raise ConfigError(f'stories must be a positive integer, got {stories}')
    stories = int(stories)
    if not damping_ratio > 0:
        raise ConfigError(f'damping_ratio must be positive, got {damping_ratio}')

    masses = _per_story(story_mass, stories, 'story_mass')
    stiffness = _per_story(story_stiffness, stories, 'story_stiffness')

    if isinstance(link_params, LinkParams):
        link_params = [link_params] * stories
    link_params = list(link_params)
    if len(link_params) != stories:
        raise ConfigError(
            f'expected {stories} link parameter sets, got {len(link_params)}'
        )

    M = np.diag(masses)
    K = np.zeros((stories, stories))
    for i, k in enumerate(stiffness):
        K[i, i] += k
        if i > 0:
            K[i - 1, i - 1] += k
            K[i - 1, i] -= k
            K[i, i - 1] -= k

    omega_1 = np.sqrt(linalg.eigh(K, M, eigvals_only=True)[0])
    a0 = 2 * damping_ratio * omega_1
    C = a0 * M

    links = [
        BoucWenLink.from_amplitude(story, story + 1, p.k_link, p.A, p.z_max, p.w)
        for story, p in enumerate(link_params)
    ]

    return StructuralModel(
        M,
        C,
        K,
        links,
        constrained_dofs=(GROUND,),
        metadata={'stories': stories, 'mass_damping_coefficient': a0},
    )


def natural_frequencies(model: StructuralModel) -> np.ndarray:
    """Angular natural frequencies of the linear skeleton (rad/s)"""
    eigvals = linalg.eigh(model.linear_stiffness, model.mass, eigvals_only=True)
    return np.sqrt(np.clip(eigvals, 0, None))


def _slope(z, sign, A, beta, gamma, w):
    """dz/dx of the Bouc-Wen law and its derivative with respect to z"""
    mag = np.abs(z)
    pow_w1 = mag ** (w - 1)
    rate = A - sign * beta * z * pow_w1 - gamma * mag * pow_w1
    d_rate = -w * pow_w1 * (sign * beta + gamma * np.sign(z))
    return rate, d_rate


def advance_links(
    links: LinkSet,
    z: np.ndarray,
    delta: np.ndarray,
    substeps: int = 1,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Advance link states over one displacement increment with RK4

    Args:
        - links: link parameters
        - z: link states at the start of the step
        - delta: link deformation increments over the step
        - substeps: equal RK4 sub-steps per increment

    Returns:
        (z_new, dz_new/d_delta, dz_new/dz), all per link. Derivatives vanish
        for links clamped at saturation.
    """
    A = links.amplitude
    beta = links.beta
    gamma = links.gamma
    w = links.exponent
    z_max = links.z_max

    sign = np.where(delta >= 0, 1.0, -1.0)
    h = delta / substeps

    z = np.array(z, dtype=np.float64)
    dz_ddelta = np.zeros_like(z)
    dz_dz = np.ones_like(z)

    for _ in range(substeps):
        k1, d1 = _slope(z, sign, A, beta, gamma, w)
        z2 = z + h / 2 * k1
        k2, d2 = _slope(z2, sign, A, beta, gamma, w)
        z3 = z + h / 2 * k2
        k3, d3 = _slope(z3, sign, A, beta, gamma, w)
        z4 = z + h * k3
        k4, d4 = _slope(z4, sign, A, beta, gamma, w)

        z_next = z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)

        # Partial derivatives of one RK4 step with respect to its step size
        dk2_h = d2 * k1 / 2
        dk3_h = d3 * (k2 / 2 + h / 2 * dk2_h)
        dk4_h = d4 * (k3 + h * dk3_h)
        step_h = (k1 + 2 * k2 + 2 * k3 + k4) / 6 + h / 6 * (
            2 * dk2_h + 2 * dk3_h + dk4_h
        )

        # ... and with respect to its initial state
        dk1_z = d1
        dk2_z = d2 * (1 + h / 2 * dk1_z)
        dk3_z = d3 * (1 + h / 2 * dk2_z)
        dk4_z = d4 * (1 + h * dk3_z)
        step_z = 1 + h / 6 * (dk1_z + 2 * dk2_z + 2 * dk3_z + dk4_z)

        dz_ddelta = step_z * dz_ddelta + step_h / substeps
        dz_dz = step_z * dz_dz

        clamped = np.abs(z_next) > z_max
        z = np.where(clamped, np.sign(z_next) * z_max, z_next)
        dz_ddelta = np.where(clamped, 0.0, dz_ddelta)
        dz_dz = np.where(clamped, 0.0, dz_dz)

    return z, dz_ddelta, dz_dz


def restoring_force(
    model: StructuralModel,
    u: np.ndarray,
    v: np.ndarray,
    z: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Internal force `K u + B^T (k_link A z)`

    Args:
        - model: structural model
        - u: displacement vector, length n
        - v: velocity vector, length n (damping is applied by the integrator)
        - z: link states; defaults to the virgin state

    Returns:
        Force vector of length n. Link states are not modified.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    msg = f'u and v must have length {model.n}'
    assert u.shape == (model.n,) and v.shape == (model.n,), msg

    force = model.linear_stiffness @ u
    if model.n_elements:
        if z is None:
            z = model.initial_link_state()
        force = force + model.link_matrix.T @ (model.link_force_scale * z)
    return force


def update_link_states(
    model: StructuralModel,
    x_dot: np.ndarray,
    dt: float,
    z: Optional[np.ndarray] = None,
    substeps: int = 1,
) -> np.ndarray:
    """Advance every link by one time step with its velocity held constant

    Args:
        - model: structural model
        - x_dot: link relative velocities, one per link
        - dt: step length (s), > 0
        - z: link states at the start of the step; defaults to the virgin state
        - substeps: RK4 sub-steps per structural step

    Returns:
        New link states, clamped to `[-z_max, z_max]`.
    """
    if not dt > 0:
        raise ConfigError(f'dt must be positive, got {dt}')
    if z is None:
        z = model.initial_link_state()
    x_dot = np.asarray(x_dot, dtype=np.float64)
    msg = f'x_dot must have one entry per link ({model.n_elements})'
    assert x_dot.shape == (model.n_elements,), msg

    z_new, _, _ = advance_links(model.link_set, z, x_dot * dt, substeps)
    return z_new


def tangent_stiffness(
    model: StructuralModel,
    u: np.ndarray,
    v: np.ndarray,
    dt: float,
    z: Optional[np.ndarray] = None,
    substeps: int = 1,
) -> np.ndarray:
    """Consistent tangent of the one-step internal force

    The one-step internal force is `restoring_force(model, u, ., z_new)` with
    `z_new = update_link_states(model, B v, dt, z)`, `v` being the mean nodal
    velocity over the step. Its derivative with respect to the end-of-step
    displacement is `K + B^T diag(k_link A dz_new/d_delta) B`.

    Args:
        - model: structural model
        - u: end-of-step displacement, length n
        - v: mean velocity over the step, length n
        - dt: step length (s)
        - z: link states at the start of the step
        - substeps: RK4 sub-steps per structural step
    """
    u = np.asarray(u, dtype=np.float64)
    msg = f'u must have length {model.n}'
    assert u.shape == (model.n,), msg
    if not model.n_elements:
        return model.linear_stiffness.copy()

    if z is None:
        z = model.initial_link_state()
    delta = model.link_matrix @ (np.asarray(v, dtype=np.float64) * dt)
    _, dz_ddelta, _ = advance_links(model.link_set, z, delta, substeps)

    B = model.link_matrix
    return model.linear_stiffness + B.T @ (
        (model.link_force_scale * dz_ddelta)[:, None] * B
    )


def step_internal_force(
    model: StructuralModel,
    u_prev: np.ndarray,
    u: np.ndarray,
    z: np.ndarray,
    substeps: int = 1,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Internal force, tangent and trial link states for a step `u_prev -> u`"""
    K = model.linear_stiffness
    if not model.n_elements:
        return K @ u, K, z

    B = model.link_matrix
    delta = B @ (u - u_prev)
    z_new, dz_ddelta, _ = advance_links(model.link_set, z, delta, substeps)
    scale = model.link_force_scale
    force = K @ u + B.T @ (scale * z_new)
    tangent = K + B.T @ ((scale * dz_ddelta)[:, None] * B)
    return force, tangent, z_new


def link_forces(model: StructuralModel, z: np.ndarray) -> np.ndarray:
    """Hysteretic link forces for states `z` (any leading shape)"""
    return np.asarray(z) * model.link_force_scale


def replay_link_states(
    model: StructuralModel, displacements: np.ndarray, substeps: int = 1
) -> np.ndarray:
    """Rebuild the link state history from a displacement history

    Args:
        - model: structural model
        - displacements: T x n displacement history starting from rest
        - substeps: RK4 sub-steps, as used by the producing run

    Returns:
        T x n_e link states; row t is the state once `displacements[t]` is
        reached, starting from the virgin state at zero displacement.
    """
    displacements = np.asarray(displacements, dtype=np.float64)
    msg = f'displacements must be T x {model.n}'
    assert displacements.ndim == 2 and displacements.shape[1] == model.n, msg

    B = model.link_matrix
    states = np.empty((displacements.shape[0], model.n_elements))
    z = model.initial_link_state()
    previous = np.zeros(model.n)
    for t, u in enumerate(displacements):
        z, _, _ = advance_links(model.link_set, z, B @ (u - previous), substeps)
        states[t] = z
        previous = u
    return states


def replay_link_forces(
    model: StructuralModel, displacements: np.ndarray, substeps: int = 1
) -> np.ndarray:
    """T x n_e link force history for a displacement history"""
    return link_forces(model, replay_link_states(model, displacements, substeps))


def element_force_records(
    model: StructuralModel,
    forces: np.ndarray,
    steps: Optional[Sequence[int]] = None,
) -> Iterator[ElementForceRecord]:
    """Expand a T x n_e link force history into per-element records"""
    forces = np.asarray(forces, dtype=np.float64)
    msg = f'link force history must have {model.n_elements} columns'
    assert forces.ndim == 2 and forces.shape[1] == model.n_elements, msg

    if steps is None:
        steps = range(forces.shape[0])
    for t in steps:
        for e, link in enumerate(model.links):
            s = forces[t, e]
            yield ElementForceRecord(e, t, (link.dof_i, link.dof_j), [-s, s])
