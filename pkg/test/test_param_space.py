import numpy as np
import pytest

from grassmann_prom.errors import ConfigError, OutOfDomainError
from grassmann_prom.param_space import (
    Axis,
    Domain,
    ParameterPoint,
    Subdomain,
    interpolation_weights,
    partition_grid,
    sample_domain,
    validation_points,
)

TOY_DOMAIN = Domain((Axis('A', 0.1, 1.0), Axis('z_max', 1e4, 5e4)))
UNIT_SQUARE = Domain((Axis('a', 0.0, 1.0), Axis('b', 0.0, 1.0)))

PARTITION_CASES = [
    # (domain, kwargs, base count, overlapping count)
    (UNIT_SQUARE, {'divisions': (1, 1)}, 1, 0),
    (UNIT_SQUARE, {'divisions': (2, 3)}, 6, 0),
    (TOY_DOMAIN, {'extents': (0.4, 1.6e4)}, 4, 5),
    (TOY_DOMAIN, {'extents': (0.2, 0.8e4)}, 20, 5),
    (TOY_DOMAIN, {'extents': (0.3, 1e4)}, 12, 0),
]


@pytest.mark.parametrize('domain,kwargs,base,overlapping', PARTITION_CASES)
def test_partition_counts(domain, kwargs, base, overlapping):
    grid = partition_grid(domain, **kwargs)
    assert grid.base_count == base, 'wrong number of regular subdomains'
    assert grid.overlapping_count == overlapping, 'wrong number of overlapping cells'
    assert [s.index for s in grid.subdomains] == list(range(len(grid)))


def test_identity_partition_centroid():
    grid = partition_grid(UNIT_SQUARE, divisions=(1, 1))
    sub = grid.subdomains[0]
    assert sub.centroid.coords == (0.5, 0.5)
    assert len(sub.training_points) == 5, 'corners plus centroid'
    assert sub.reference_index == 4


def test_partition_covers_domain():
    grid = partition_grid(TOY_DOMAIN, extents=(0.4, 1.6e4))
    rng = np.random.default_rng(0)
    for unit in rng.uniform(size=(200, 2)):
        point = ParameterPoint(TOY_DOMAIN.denormalize(unit))
        sub = grid.locate(point)
        assert sub.contains(point), 'located subdomain must contain the point'


def test_overlap_none_closes_strip():
    grid = partition_grid(TOY_DOMAIN, extents=(0.4, 1.6e4), overlap='none')
    assert grid.overlapping_count == 0
    assert len(grid) == 9
    uppers = {s.upper.coords for s in grid.subdomains}
    assert (1.0, 5e4) in uppers, 'last cell must end on the domain boundary'


def test_locate_table_box():
    domain = Domain((Axis('A', 0.25, 1.75), Axis('z_max', 16.0, 36.0)))
    grid = partition_grid(domain, divisions=(1, 1))
    assert grid.locate(ParameterPoint((0.62, 31.0))).index == 0


def test_locate_shared_face_prefers_lowest_index():
    grid = partition_grid(UNIT_SQUARE, divisions=(2, 1))
    # Equidistant from both centroids
    assert grid.locate(ParameterPoint((0.5, 0.5))).index == 0


def test_locate_nearest_centroid_in_overlap():
    grid = partition_grid(TOY_DOMAIN, extents=(0.4, 1.6e4))
    point = ParameterPoint((0.85, 2.0e4))
    sub = grid.locate(point)
    unit = TOY_DOMAIN.normalize(point.coords)
    distances = [
        np.linalg.norm(s.normalized_centroid - unit)
        for s in grid.subdomains
        if s.contains(point)
    ]
    chosen = np.linalg.norm(sub.normalized_centroid - unit)
    assert chosen == pytest.approx(min(distances))


def test_locate_outside_domain():
    grid = partition_grid(UNIT_SQUARE, divisions=(2, 2))
    with pytest.raises(OutOfDomainError):
        grid.locate(ParameterPoint((1.5, 0.5)))


def test_weights_partition_of_unity():
    sub = partition_grid(TOY_DOMAIN, divisions=(1, 1)).subdomains[0]
    rng = np.random.default_rng(1)
    for unit in rng.uniform(size=(1000, 2)):
        w = interpolation_weights(sub, ParameterPoint(TOY_DOMAIN.denormalize(unit)))
        assert np.all(w >= 0), 'weights must be non-negative'
        assert abs(w.sum() - 1) < 1e-12, 'weights must sum to one'


def test_weights_at_training_point():
    sub = partition_grid(UNIT_SQUARE, divisions=(1, 1)).subdomains[0]
    for i, point in enumerate(sub.training_points):
        w = interpolation_weights(sub, point)
        expected = np.zeros(len(sub.training_points))
        expected[i] = 1.0
        assert np.array_equal(w, expected), 'training point must get its indicator'


def test_weights_scale_invariant():
    # Normalization makes the weights independent of the axis units
    sub_a = partition_grid(UNIT_SQUARE, divisions=(1, 1)).subdomains[0]
    scaled = Domain((Axis('a', 0.0, 1.0), Axis('b', 0.0, 1e4)))
    sub_b = partition_grid(scaled, divisions=(1, 1)).subdomains[0]
    w_a = interpolation_weights(sub_a, ParameterPoint((0.3, 0.8)))
    w_b = interpolation_weights(sub_b, ParameterPoint((0.3, 8e3)))
    assert np.allclose(w_a, w_b, rtol=0, atol=1e-14)


def test_weights_outside_subdomain():
    sub = partition_grid(UNIT_SQUARE, divisions=(2, 2)).subdomains[0]
    with pytest.raises(OutOfDomainError):
        interpolation_weights(sub, ParameterPoint((0.9, 0.9)))


def test_training_points_deduplicated():
    grid = partition_grid(UNIT_SQUARE, divisions=(2, 2))
    # 3 x 3 shared corners plus 4 centroids
    assert len(grid.training_points()) == 13
    corner = ParameterPoint((0.5, 0.5))
    assert grid.canonical(corner) in grid.training_points()


def test_validation_points():
    sub = partition_grid(UNIT_SQUARE, divisions=(1, 1)).subdomains[0]
    points = validation_points(sub)
    assert len(points) == 4
    assert points[0].coords == (0.25, 0.25)
    assert all(sub.contains(p) for p in points)


def test_sample_domain():
    points = sample_domain(UNIT_SQUARE, (3, 1))
    assert [p.coords for p in points] == [(0.0, 0.5), (0.5, 0.5), (1.0, 0.5)]


INVALID_CASES = [
    lambda: Axis('a', 1.0, 1.0),
    lambda: Axis('a', 0.0, np.inf),
    lambda: ParameterPoint(()),
    lambda: ParameterPoint((np.nan, 1.0)),
    lambda: partition_grid(UNIT_SQUARE, divisions=(0, 1)),
    lambda: partition_grid(UNIT_SQUARE, extents=(2.0, 0.5)),
    lambda: partition_grid(UNIT_SQUARE),
    lambda: Subdomain(0, ParameterPoint((0, 0)), ParameterPoint((0, 1)), UNIT_SQUARE),
]


@pytest.mark.parametrize('build', INVALID_CASES)
def test_invalid_input(build):
    with pytest.raises(ConfigError):
        build()
