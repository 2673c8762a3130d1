import numpy as np
import pytest

from grassmann_prom.param_space import ParameterPoint
from grassmann_prom.prom import (
    build_region,
    interpolate_coefficients,
    interpolate_entries,
)
from grassmann_prom.verify import synthetic_region

QUERY = ParameterPoint((0.35, 0.6))


@pytest.fixture(scope='module')
def large_region():
    rng = np.random.default_rng(7)
    return build_region(*synthetic_region(rng, n=20000, r=5), 5)


@pytest.mark.parametrize(
    'interpolate', [interpolate_entries, interpolate_coefficients]
)
def test_interpolation_speed(benchmark, large_region, interpolate):
    basis = benchmark(interpolate, large_region, QUERY)
    assert basis.matrix.shape == (20000, 5)
