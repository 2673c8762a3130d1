"""
Parametric load histories

Two generators are provided: a deterministic sinusoidal nodal load, and an
earthquake-like ground acceleration made of Gaussian white noise passed through
a zero-phase low-pass Butterworth filter and rescaled to a target amplitude.
"""
import hashlib
import logging
from typing import Optional, Sequence

import attr
import numpy as np
from scipy import signal

from .constants import BUTTERWORTH_ORDER
from .errors import ConfigError

logger = logging.getLogger(__name__)


def _finite_samples(instance, attribute, value):
    if value.ndim != 2 or value.shape[0] < 1:
        raise ConfigError(f'load samples must be a T x n matrix, got {value.shape}')
    if not np.all(np.isfinite(value)):
        raise ConfigError('load samples contain non-finite values')


@attr.s
class LoadHistory:
    """Nodal forces sampled at `t_k = k * dt`

    Args:
        dt: sampling step (s)
        samples: T x n matrix of nodal forces (N)
        generator: name of the generator that produced the history
        seed: random seed, `None` for deterministic generators
        params: generator parameters, for provenance
    """

    dt: float = attr.ib(converter=float)
    samples: np.ndarray = attr.ib(
        converter=lambda x: np.array(x, dtype=np.float64, ndmin=2),
        validator=_finite_samples,
        repr=False,
    )
    generator: str = attr.ib(default='custom')
    seed: Optional[int] = attr.ib(default=None)
    params: dict = attr.ib(factory=dict)

    def __attrs_post_init__(self):
        if not self.dt > 0:
            raise ConfigError(f'dt must be positive, got {self.dt}')

    @property
    def steps(self) -> int:
        return self.samples.shape[0]

    @property
    def dofs(self) -> int:
        return self.samples.shape[1]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps) * self.dt

    def provenance(self) -> dict:
        return {'generator': self.generator, 'seed': self.seed, **self.params}


def _positive(instance, attribute, value):
    if not value > 0:
        raise ConfigError(f'{attribute.name} must be positive, got {value}')


@attr.s(frozen=True)
class QuakeParams:
    """Parameters of the filtered-noise ground motion

    Args:
        cutoff_hz: low-pass cutoff frequency (Hz)
        amplitude: scale factor applied to the unit-variance acceleration
        duration_s: length of the excitation (s)
        total_sim_s: length of the simulated window (s)
        seed: random seed of the white noise
    """

    cutoff_hz: float = attr.ib(converter=float, validator=_positive)
    amplitude: float = attr.ib(converter=float, validator=_positive)
    duration_s: float = attr.ib(converter=float, validator=_positive)
    total_sim_s: float = attr.ib(converter=float, validator=_positive)
    seed: int = attr.ib(converter=int)

    def __attrs_post_init__(self):
        if self.duration_s > self.total_sim_s:
            raise ConfigError(
                f'excitation duration {self.duration_s} s exceeds the simulated '
                f'window {self.total_sim_s} s'
            )


def _pattern(dof_pattern) -> np.ndarray:
    pattern = np.asarray(dof_pattern, dtype=np.float64)
    if pattern.ndim != 1 or not np.all(np.isfinite(pattern)):
        raise ConfigError('dof pattern must be a finite vector')
    return pattern


def sinusoid(
    freq_hz: float,
    amplitude_N: float,
    dof_pattern: Sequence[float],
    dt: float,
    T: int,
) -> LoadHistory:
    """Nodal load `f_i(t) = pattern_i * amplitude * sin(2 pi freq t)`

    Args:
        - freq_hz: load frequency (Hz), below the Nyquist frequency `1 / (2 dt)`
        - amplitude_N: load amplitude (N)
        - dof_pattern: per-DOF multipliers, length n
        - dt: sampling step (s)
        - T: number of samples
    """
    if not dt > 0:
        raise ConfigError(f'dt must be positive, got {dt}')
    nyquist = 1 / (2 * dt)
    if not 0 <= freq_hz < nyquist:
        raise ConfigError(
            f'frequency {freq_hz} Hz aliases at dt = {dt} s '
            f'(Nyquist frequency {nyquist} Hz)'
        )
    if int(T) < 1:
        raise ConfigError(f'T must be >= 1, got {T}')

    pattern = _pattern(dof_pattern)
    t = np.arange(int(T)) * dt
    wave = amplitude_N * np.sin(2 * np.pi * freq_hz * t)
    return LoadHistory(
        dt,
        wave[:, None] * pattern[None, :],
        generator='sinusoid',
        params={'freq_hz': freq_hz, 'amplitude_N': amplitude_N},
    )


def ground_acceleration(p: QuakeParams, dt: float) -> np.ndarray:
    """Filtered, normalized and scaled ground acceleration over the full window"""
    nyquist = 1 / (2 * dt)
    if not p.cutoff_hz < nyquist:
        raise ConfigError(
            f'cutoff {p.cutoff_hz} Hz is not below the Nyquist frequency {nyquist} Hz'
        )

    total = int(round(p.total_sim_s / dt))
    active = int(round(p.duration_s / dt))

    sos = signal.butter(
        BUTTERWORTH_ORDER, p.cutoff_hz, btype='low', fs=1 / dt, output='sos'
    )
    padlen = 3 * (2 * len(sos) + 1)
    if active <= padlen:
        raise ConfigError(
            f'excitation of {active} samples is too short for the filter '
            f'(needs more than {padlen})'
        )

    rng = np.random.default_rng(p.seed)
    noise = rng.standard_normal(active)
    filtered = signal.sosfiltfilt(sos, noise)
    filtered /= filtered.std()

    accel = np.zeros(total)
    accel[:active] = p.amplitude * filtered
    return accel


def filtered_noise_quake(
    p: QuakeParams,
    mass_diag: Sequence[float],
    dt: float,
    dof_pattern: Optional[Sequence[float]] = None,
) -> LoadHistory:
    """Equivalent nodal forces `-m_i * a_g(t)` of a filtered-noise ground motion

    Args:
        - p: excitation parameters
        - mass_diag: lumped nodal masses
        - dt: sampling step (s)
        - dof_pattern: influence vector selecting the excited DOFs; all DOFs
          by default

    Returns:
        LoadHistory of `round(total_sim_s / dt)` samples, zero after
        `duration_s`. Bit-identical for identical inputs.
    """
    if not dt > 0:
        raise ConfigError(f'dt must be positive, got {dt}')
    mass_diag = _pattern(mass_diag)
    pattern = np.ones_like(mass_diag) if dof_pattern is None else _pattern(dof_pattern)
    msg = 'mass_diag and dof_pattern must have the same length'
    assert pattern.shape == mass_diag.shape, msg

    accel = ground_acceleration(p, dt)
    logger.debug(
        'quake: cutoff %.3f Hz, amplitude %.3f, seed %d, peak %.3f',
        p.cutoff_hz,
        p.amplitude,
        p.seed,
        np.abs(accel).max(),
    )
    return LoadHistory(
        dt,
        accel[:, None] * (-mass_diag * pattern)[None, :],
        generator='filtered_noise_quake',
        seed=p.seed,
        params=attr.asdict(p),
    )


def derive_seed(master_seed: int, key: str) -> int:
    """Per-sample seed derived by hashing the master seed and a sample key"""
    digest = hashlib.sha256(f'{int(master_seed)}:{key}'.encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'little') & (2**63 - 1)
