import numpy as np
import pytest
from scipy import linalg

from grassmann_prom.errors import IllConditionedError
from grassmann_prom.grassmann import (
    TangentVector,
    combine,
    exp_map,
    largest_principal_angle,
    log_map,
    principal_angles,
)
from grassmann_prom.pod import Provenance, ReductionBasis, orthonormality_error
from grassmann_prom.verify import nearby_basis, random_basis

SHAPE_CASES = [
    # (n, r, perturbation)
    (10, 1, 0.1),
    (40, 5, 0.2),
    (100, 8, 0.05),
    (12, 6, 0.3),
]


def basis(matrix, source=''):
    return ReductionBasis(matrix, None, Provenance.LOCAL_SNAPSHOT, source)


def pair(rng, n, r, scale):
    V0 = random_basis(rng, n, r)
    return basis(V0, 'v0'), basis(nearby_basis(rng, V0, scale), 'vi')


@pytest.mark.parametrize('n,r,scale', SHAPE_CASES)
def test_round_trip(n, r, scale):
    rng = np.random.default_rng(n * r)
    for _ in range(25):
        v0, vi = pair(rng, n, r, scale)
        back = exp_map(v0, log_map(v0, vi))
        assert largest_principal_angle(back, vi) < 1e-9, 'exp(log(Vi)) must span Vi'
        assert orthonormality_error(back.matrix) < 1e-10
        assert back.provenance is Provenance.INTERPOLATED


@pytest.mark.parametrize('n,r,scale', SHAPE_CASES)
def test_log_is_horizontal(n, r, scale):
    rng = np.random.default_rng(n + r)
    v0, vi = pair(rng, n, r, scale)
    g = log_map(v0, vi)
    assert g.shape == (n, r)
    assert g.is_tangent_to(v0), 'V0^T G must vanish'
    assert g.reference_id == v0.fingerprint()
    assert not g.is_tangent_to(vi), 'tangent is bound to its reference basis'


def test_log_singular_values_are_principal_angles():
    rng = np.random.default_rng(1)
    v0, vi = pair(rng, 30, 4, 0.3)
    g = log_map(v0, vi)
    assert np.allclose(
        np.sort(linalg.svdvals(g.matrix)), np.sort(principal_angles(v0, vi)), atol=1e-10
    )


def test_log_of_reference_is_zero():
    rng = np.random.default_rng(2)
    v0 = basis(random_basis(rng, 20, 3))
    g = log_map(v0, v0)
    assert np.abs(g.matrix).max() < 1e-12


def test_log_ignores_right_rotation():
    rng = np.random.default_rng(3)
    v0, vi = pair(rng, 20, 3, 0.2)
    Q = random_basis(rng, 3, 3)
    rotated = basis(vi.matrix @ Q, 'rotated')
    assert np.allclose(log_map(v0, vi).matrix, log_map(v0, rotated).matrix, atol=1e-10)


def test_exp_of_zero_is_reference():
    rng = np.random.default_rng(4)
    v0 = basis(random_basis(rng, 15, 4))
    zero = TangentVector(np.zeros((15, 4)), v0.fingerprint())
    assert np.allclose(exp_map(v0, zero).matrix, v0.matrix, atol=1e-12)


def test_geodesic_midpoint():
    rng = np.random.default_rng(5)
    v0, vi = pair(rng, 25, 3, 0.2)
    g = log_map(v0, vi)
    half = exp_map(v0, g.scaled(0.5))
    full = largest_principal_angle(v0, vi)
    assert largest_principal_angle(v0, half) == pytest.approx(0.5 * full, abs=1e-9)
    assert largest_principal_angle(half, vi) == pytest.approx(0.5 * full, abs=1e-9)


def test_orthogonal_direction_is_ill_conditioned():
    E = np.eye(6)
    v0 = basis(E[:, [0, 1]], 'v0')
    vi = basis(E[:, [0, 2]], 'vi')
    with pytest.raises(IllConditionedError) as info:
        log_map(v0, vi)
    assert info.value.pair == ('v0', 'vi')


def test_combine_is_weighted_sum():
    rng = np.random.default_rng(6)
    v0 = basis(random_basis(rng, 12, 2))
    tangents = [
        log_map(v0, basis(nearby_basis(rng, v0.matrix, 0.1))) for _ in range(3)
    ]
    weights = [0.2, 0.5, 0.3]
    combined = combine(tangents, weights, 'q')
    expected = sum(w * t.matrix for w, t in zip(weights, tangents))
    assert np.allclose(combined.matrix, expected)
    assert combined.is_tangent_to(v0), 'tangent spaces are linear'


def test_combine_rejects_mixed_references():
    a = TangentVector(np.zeros((4, 1)), 'a')
    b = TangentVector(np.zeros((4, 1)), 'b')
    with pytest.raises(AssertionError):
        combine([a, b], [0.5, 0.5])
    with pytest.raises(AssertionError):
        combine([a], [0.5, 0.5])
