"""
Implicit Newmark time integration with Newton-Raphson iterations

The same integrator drives the full-order model and every reduced model through
the `DynamicSystem` interface. Internal states (the Bouc-Wen link variables)
are advanced inside each Newton trial and committed once the step converges.

Ref:
https://en.wikipedia.org/wiki/Newmark-beta_method
"""
import abc
import logging
import time
from typing import Any, Optional, Tuple

import attr
import numpy as np
from scipy import linalg

from . import fem
from .constants import (
    DEFAULT_DT,
    MAX_NEWTON_ITERS,
    NEWMARK_BETA,
    NEWMARK_GAMMA,
    NEWTON_TOL,
)
from .errors import ConfigError, ConvergenceError
from .excite import LoadHistory

logger = logging.getLogger(__name__)


def _positive(instance, attribute, value):
    if not value > 0:
        raise ConfigError(f'{attribute.name} must be positive, got {value}')


@attr.s(frozen=True)
class IntegratorConfig:
    """Newmark and Newton settings

    Args:
        dt: time step (s)
        beta: Newmark beta
        gamma: Newmark gamma
        newton_tol: relative residual tolerance
        max_newton_iters: Newton iterations allowed per step
    """

    dt: float = attr.ib(default=DEFAULT_DT, converter=float, validator=_positive)
    beta: float = attr.ib(default=NEWMARK_BETA, converter=float)
    gamma: float = attr.ib(default=NEWMARK_GAMMA, converter=float)
    newton_tol: float = attr.ib(
        default=NEWTON_TOL, converter=float, validator=_positive
    )
    max_newton_iters: int = attr.ib(
        default=MAX_NEWTON_ITERS, converter=int, validator=_positive
    )

    def __attrs_post_init__(self):
        if not (2 * self.beta >= self.gamma >= 0.5):
            raise ConfigError(
                f'Newmark parameters beta={self.beta}, gamma={self.gamma} '
                'leave the unconditionally stable region 2 beta >= gamma >= 1/2'
            )


@attr.s
class ResponseHistory:
    """Time histories of one integration run

    Row 0 holds the initial conditions; row k the state at `t = k * dt`.
    """

    dt: float = attr.ib()
    displacements: np.ndarray = attr.ib(repr=False)
    velocities: np.ndarray = attr.ib(repr=False)
    accelerations: np.ndarray = attr.ib(repr=False)
    wall_time_s: float = attr.ib()
    newton_iteration_counts: np.ndarray = attr.ib(repr=False)
    residual_ratios: np.ndarray = attr.ib(repr=False)
    internal_states: Optional[np.ndarray] = attr.ib(default=None, repr=False)

    def __attrs_post_init__(self):
        for name in ('displacements', 'velocities', 'accelerations'):
            msg = f'{name} must be finite'
            assert np.all(np.isfinite(getattr(self, name))), msg

    @property
    def steps(self) -> int:
        return self.displacements.shape[0]

    @property
    def order(self) -> int:
        return self.displacements.shape[1]

    def stats(self) -> dict:
        counts = self.newton_iteration_counts[1:]
        ratios = self.residual_ratios[np.isfinite(self.residual_ratios)]
        return {
            'dt': self.dt,
            'steps': int(self.steps),
            'order': int(self.order),
            'wall_time_s': float(self.wall_time_s),
            'newton_iterations_total': int(counts.sum()),
            'newton_iterations_max': int(counts.max()) if counts.size else 0,
            'residual_ratio_median': float(np.median(ratios)) if ratios.size else None,
        }


class DynamicSystem(metaclass=abc.ABCMeta):
    """Second-order system `M a + C v + g(u) = f` in some set of coordinates"""

    @property
    @abc.abstractmethod
    def mass(self) -> np.ndarray:
        pass

    @property
    @abc.abstractmethod
    def damping(self) -> np.ndarray:
        pass

    @property
    @abc.abstractmethod
    def load_dim(self) -> int:
        """Number of nodal loads accepted by `project_loads`"""
        pass

    @property
    def order(self) -> int:
        return self.mass.shape[0]

    @abc.abstractmethod
    def initial_state(self) -> Any:
        pass

    @abc.abstractmethod
    def internal_force(
        self, q_prev: np.ndarray, q: np.ndarray, state: Any
    ) -> Tuple[np.ndarray, np.ndarray, Any]:
        """Internal force, its tangent, and the trial state for `q_prev -> q`

        Must not modify `state`.
        """
        pass

    @abc.abstractmethod
    def project_loads(self, samples: np.ndarray) -> np.ndarray:
        """Map a T x n nodal load matrix onto the system coordinates"""
        pass


class FullOrderSystem(DynamicSystem):
    """The high-fidelity structural model as a dynamic system"""

    def __init__(self, model: fem.StructuralModel, substeps: int = 1):
        self.model = model
        self.substeps = int(substeps)

    @property
    def mass(self):
        return self.model.mass

    @property
    def damping(self):
        return self.model.damping

    @property
    def load_dim(self):
        return self.model.n

    def initial_state(self):
        return self.model.initial_link_state()

    def internal_force(self, q_prev, q, state):
        return fem.step_internal_force(self.model, q_prev, q, state, self.substeps)

    def project_loads(self, samples):
        return samples


def integrate(
    system: DynamicSystem,
    loads: LoadHistory,
    cfg: IntegratorConfig,
    *,
    u0: Optional[np.ndarray] = None,
    v0: Optional[np.ndarray] = None,
) -> ResponseHistory:
    """Integrate the system over the load history

    Args:
        - system: full-order or reduced dynamic system
        - loads: nodal load history sampled with `cfg.dt`
        - cfg: integrator settings

    Kwargs:
        - u0: initial displacement in system coordinates (zero by default)
        - v0: initial velocity in system coordinates (zero by default)

    Returns:
        ResponseHistory with one row per load sample.

    Raises:
        ConvergenceError: a step did not converge within `max_newton_iters`.
    """
    if not np.isclose(loads.dt, cfg.dt, rtol=1e-12, atol=0):
        raise ConfigError(
            f'load history dt {loads.dt} does not match integrator dt {cfg.dt}'
        )
    msg = f'loads have {loads.dofs} DOFs, system expects {system.load_dim}'
    assert loads.dofs == system.load_dim, msg

    dt = cfg.dt
    beta = cfg.beta
    gamma = cfg.gamma
    c0 = 1 / (beta * dt**2)
    c1 = gamma / (beta * dt)

    M = system.mass
    C = system.damping
    m = system.order
    f = system.project_loads(loads.samples)
    T = f.shape[0]

    u = np.zeros(m) if u0 is None else np.array(u0, dtype=np.float64)
    v = np.zeros(m) if v0 is None else np.array(v0, dtype=np.float64)
    state = system.initial_state()

    displacements = np.empty((T, m))
    velocities = np.empty((T, m))
    accelerations = np.empty((T, m))
    iterations = np.zeros(T, dtype=np.int64)
    ratios = np.full(T, np.nan)
    states = None
    if isinstance(state, np.ndarray):
        states = np.empty((T,) + state.shape)
        states[0] = state

    start = time.perf_counter()

    g, _, _ = system.internal_force(u, u, state)
    a = linalg.solve(M, f[0] - C @ v - g)
    displacements[0] = u
    velocities[0] = v
    accelerations[0] = a

    for k in range(1, T):
        u_pred = u + dt * v + dt**2 * (0.5 - beta) * a
        v_pred = v + dt * (1 - gamma) * a

        u_new = u_pred.copy()
        previous_norm = None
        for it in range(cfg.max_newton_iters + 1):
            a_new = c0 * (u_new - u_pred)
            v_new = v_pred + gamma * dt * a_new
            g, K_t, trial = system.internal_force(u, u_new, state)

            inertia = M @ a_new
            viscous = C @ v_new
            residual = inertia + viscous + g - f[k]
            norm = linalg.norm(residual)
            scale = max(
                linalg.norm(f[k]),
                linalg.norm(g),
                linalg.norm(inertia),
                linalg.norm(viscous),
                np.finfo(float).tiny,
            )
            if norm <= cfg.newton_tol * scale:
                if previous_norm:
                    ratios[k] = norm / previous_norm
                break
            if it == cfg.max_newton_iters:
                raise ConvergenceError(k, norm, it)

            jacobian = c0 * M + c1 * C + K_t
            u_new = u_new + linalg.solve(jacobian, -residual)
            previous_norm = norm

        iterations[k] = it
        u, v, a, state = u_new, v_new, a_new, trial

        displacements[k] = u
        velocities[k] = v
        accelerations[k] = a
        if states is not None:
            states[k] = state

    wall = time.perf_counter() - start
    history = ResponseHistory(
        dt,
        displacements,
        velocities,
        accelerations,
        wall,
        iterations,
        ratios,
        states,
    )
    logger.debug(
        'integrated %d steps of order %d in %.3f s: %d Newton iterations (max %d)',
        T,
        m,
        wall,
        iterations.sum(),
        iterations.max(),
    )
    return history


def integrate_reduced(
    rom: DynamicSystem, loads: LoadHistory, cfg: IntegratorConfig
) -> ResponseHistory:
    """Integrate a reduced system with the same contract as `integrate`

    The reduced coordinates start at rest; the returned history holds reduced
    coordinates (use the system's `expand` to recover nodal displacements).
    """
    msg = 'reduced system must map the nodal loads of the full model'
    assert loads.dofs == rom.load_dim, msg
    return integrate(rom, loads, cfg)


def mechanical_energy(
    mass: np.ndarray, stiffness: np.ndarray, history: ResponseHistory
) -> np.ndarray:
    """Kinetic plus strain energy of a linear system at every step"""
    u = history.displacements
    v = history.velocities
    kinetic = 0.5 * np.einsum('ti,ij,tj->t', v, mass, v)
    strain = 0.5 * np.einsum('ti,ij,tj->t', u, stiffness, u)
    return kinetic + strain
