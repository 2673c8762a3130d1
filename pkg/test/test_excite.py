import numpy as np
import pytest
from scipy import signal

from grassmann_prom.errors import ConfigError
from grassmann_prom.excite import (
    LoadHistory,
    QuakeParams,
    derive_seed,
    filtered_noise_quake,
    ground_acceleration,
    sinusoid,
)


def quake(cutoff_hz=2.0, amplitude=1.5, duration_s=20.0, total_sim_s=25.0, seed=11):
    return QuakeParams(cutoff_hz, amplitude, duration_s, total_sim_s, seed)


def test_sinusoid_pattern():
    loads = sinusoid(2.0, 1.5e4, [0.0, 0.5, 1.0], 0.005, 101)
    assert loads.samples.shape == (101, 3)
    assert np.all(loads.samples[:, 0] == 0)
    t = loads.times
    assert np.allclose(loads.samples[:, 2], 1.5e4 * np.sin(2 * np.pi * 2.0 * t))
    assert np.allclose(loads.samples[:, 1], 0.5 * loads.samples[:, 2])
    assert loads.seed is None and loads.generator == 'sinusoid'


@pytest.mark.parametrize('freq_hz,dt', [(50.0, 0.01), (120.0, 0.005), (-1.0, 0.01)])
def test_sinusoid_aliasing(freq_hz, dt):
    with pytest.raises(ConfigError):
        sinusoid(freq_hz, 1.0, [1.0], dt, 10)


def test_quake_length_and_quiet_tail():
    p = quake()
    loads = filtered_noise_quake(p, [1000.0, 2000.0], 0.01)
    assert loads.steps == 2500
    active = int(round(p.duration_s / 0.01))
    assert np.all(loads.samples[active:] == 0), 'load must vanish after duration_s'
    assert loads.seed == p.seed


def test_quake_scaling():
    p = quake(amplitude=2.5)
    accel = ground_acceleration(p, 0.01)
    active = accel[: int(round(p.duration_s / 0.01))]
    assert active.std() == pytest.approx(2.5, rel=1e-12)

    masses = np.array([1000.0, 500.0])
    loads = filtered_noise_quake(p, masses, 0.01)
    assert np.allclose(loads.samples, -accel[:, None] * masses[None, :])


def test_quake_influence_pattern():
    loads = filtered_noise_quake(quake(), [1000.0, 1000.0], 0.01, [1.0, 0.0])
    assert np.all(loads.samples[:, 1] == 0)
    assert np.any(loads.samples[:, 0] != 0)


def test_quake_is_deterministic():
    a = filtered_noise_quake(quake(seed=5), [1.0], 0.01)
    b = filtered_noise_quake(quake(seed=5), [1.0], 0.01)
    c = filtered_noise_quake(quake(seed=6), [1.0], 0.01)
    assert np.array_equal(a.samples, b.samples), 'same seed must be bit-identical'
    assert not np.array_equal(a.samples, c.samples)


@pytest.mark.parametrize('cutoff_hz', [0.5, 2.0, 8.0])
def test_quake_power_below_twice_cutoff(cutoff_hz):
    dt = 0.01
    accel = ground_acceleration(quake(cutoff_hz=cutoff_hz), dt)
    freqs, power = signal.periodogram(accel, fs=1 / dt, window='hann')
    contained = power[freqs <= 2 * cutoff_hz].sum() / power.sum()
    assert contained >= 0.99, 'filtered noise must stay below twice the cutoff'


INVALID_QUAKE_CASES = [
    # cutoff at or above Nyquist
    ({'cutoff_hz': 50.0}, 0.01),
    ({'cutoff_hz': 60.0}, 0.01),
    # too short for the zero-phase filter
    ({'duration_s': 0.1, 'total_sim_s': 1.0}, 0.01),
]


@pytest.mark.parametrize('overrides,dt', INVALID_QUAKE_CASES)
def test_quake_invalid(overrides, dt):
    with pytest.raises(ConfigError):
        ground_acceleration(quake(**overrides), dt)


def test_quake_params_validation():
    with pytest.raises(ConfigError):
        quake(duration_s=30.0, total_sim_s=25.0)
    with pytest.raises(ConfigError):
        quake(cutoff_hz=0.0)


def test_load_history_validation():
    with pytest.raises(ConfigError):
        LoadHistory(0.0, np.zeros((3, 1)))
    with pytest.raises(ConfigError):
        LoadHistory(0.01, [[np.nan]])


def test_derive_seed():
    seeds = {derive_seed(7, f'point_{i}') for i in range(100)}
    assert len(seeds) == 100, 'distinct keys must give distinct seeds'
    assert derive_seed(7, 'a') == derive_seed(7, 'a')
    assert derive_seed(7, 'a') != derive_seed(8, 'a')
    assert all(0 <= s < 2**63 for s in seeds)
