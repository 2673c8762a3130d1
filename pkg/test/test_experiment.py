import copy
import json
from pathlib import Path

import attr
import numpy as np
import pandas as pd
import pytest

from grassmann_prom.config import parse_config
from grassmann_prom.errors import ArtifactError, OutOfDomainError
from grassmann_prom.experiment import (
    ONLINE_CSV,
    Experiment,
    point_key,
    report,
    run_offline,
    run_online,
    simulate,
)
from grassmann_prom.param_space import ParameterPoint
from grassmann_prom.scenario import Scenario

TINY = {
    'name': 'tiny',
    'output': 'unused',
    'seed': 3,
    'model': {
        'scenario': 'bouc_wen',
        'stories': 4,
        'story_mass': 1000.0,
        'story_stiffness': 4.0e7,
        'damping_ratio': 0.02,
        'k_link': 1.0e7,
        'z_max_scale': 1.0e-7,
    },
    'load': {'total_s': 0.5, 'amplitude': 1.5e4, 'freq_hz': 2.0},
    'grid': {
        'axes': [
            {'name': 'A', 'lower': 0.1, 'upper': 1.0},
            {'name': 'z_max', 'lower': 1.0e4, 'upper': 5.0e4},
        ],
        'divisions': [1, 1],
    },
    'reduction': {'r_local': 2},
    'integrator': {'dt': 0.01},
}

QUAKE = {
    'name': 'quake',
    'output': 'unused',
    'seed': 5,
    'model': {
        'scenario': 'quake',
        'stories': 3,
        'story_mass': 1000.0,
        'story_stiffness': 2.0e7,
        'damping_ratio': 0.03,
        'k_link': 5.0e6,
        'A': 0.5,
        'z_max': 3.0e4,
        'z_max_scale': 1.0e-7,
    },
    'load': {'total_s': 3.0, 'duration_s': 2.0},
    'grid': {
        'axes': [
            {'name': 'cutoff_hz', 'lower': 0.5, 'upper': 3.0},
            {'name': 'amplitude', 'lower': 0.5, 'upper': 2.0},
        ],
        'divisions': [1, 1],
    },
    'reduction': {'r_local': 2},
}


def tiny(tmp_path, base=TINY, **sections):
    data = copy.deepcopy(base)
    data['output'] = str(tmp_path)
    for name, values in sections.items():
        if isinstance(values, dict) and isinstance(data.get(name), dict):
            data[name].update(values)
        else:
            data[name] = values
    return parse_config(data)


@pytest.fixture(scope='module')
def finished(tmp_path_factory):
    """Offline and online phases of the tiny experiment, run once"""
    cfg = tiny(tmp_path_factory.mktemp('tiny'))
    offline = run_offline(cfg)
    reports = run_online(cfg)
    return cfg, offline, reports


def test_offline_counts(finished):
    _, offline, _ = finished
    assert offline.simulated == 5, 'four corners and the centroid'
    assert offline.built == 2, 'one region and the global basis'


def test_online_rows(finished):
    cfg, _, reports = finished
    assert len(reports) == 4 * 4, 'four validation points, four variants'
    rows = pd.read_csv(f'{cfg.output}/{ONLINE_CSV}')
    assert list(rows['partition'].unique()) == ['tiny']
    assert set(rows['variant']) == {'global', 'local', 'entries', 'coefficients'}
    assert np.all(rows['re_u'] >= 0) and np.all(np.isfinite(rows['re_u']))
    assert rows['re_rf'].notna().all() and rows['re_sigma'].notna().all()
    assert (rows['order'] == 2).all()
    interpolated = rows['variant'].isin(['entries', 'coefficients'])
    assert rows.loc[interpolated, 'interpolation_ops'].notna().all()
    assert rows.loc[~interpolated, 'interpolation_ops'].isna().all()


def test_offline_rerun_is_a_no_op(finished):
    cfg, _, _ = finished
    again = run_offline(cfg)
    assert again.simulated == 0 and again.reused == 5
    assert again.built == 0 and again.current == 2


def test_online_rows_are_deterministic(finished):
    cfg, _, _ = finished
    first = open(f'{cfg.output}/{ONLINE_CSV}', 'rb').read()
    run_online(cfg)
    second = open(f'{cfg.output}/{ONLINE_CSV}', 'rb').read()
    assert first == second, 'online rows must be bit-identical across reruns'


def test_report(finished):
    cfg, _, _ = finished
    summary = report(cfg.output)
    assert len(summary) == 4
    assert (summary['points'] == 4).all()
    grid = pd.read_csv(f'{cfg.output}/summary/grid_coefficients.csv')
    assert list(grid.columns) == [
        'partition',
        'subdomain',
        'A',
        'z_max',
        're_u',
        're_rf',
        're_sigma',
    ]
    timing = pd.read_csv(f'{cfg.output}/summary/timing.csv')
    assert list(timing.columns[-3:]) == ['median', 'min', 'max']
    meta = json.loads((Path(cfg.output) / 'summary' / 'summary.json').read_text())
    assert meta['rows'] == 16 and len(meta['groups']) == 4


def test_report_on_empty_directory(tmp_path):
    summary = report(tmp_path)
    assert summary.empty
    assert (tmp_path / 'summary' / 'summary.csv').exists()


def test_online_needs_offline_artifacts(tmp_path):
    with pytest.raises(ArtifactError, match='offline phase'):
        run_online(tiny(tmp_path))


def test_changed_order_invalidates_regions(tmp_path):
    cfg = tiny(tmp_path, reduction={'r_local': 2, 'variants': ['local']})
    run_offline(cfg)
    changed = attr.evolve(cfg, reduction=attr.evolve(cfg.reduction, r_local=1))
    with pytest.raises(ArtifactError, match='stale'):
        run_online(changed)

    rebuilt = run_offline(changed)
    assert rebuilt.simulated == 0, 'snapshots do not depend on the order'
    assert rebuilt.built == 1
    assert {r.order for r in run_online(changed)} == {1}


def test_explicit_points(tmp_path):
    cfg = tiny(tmp_path, reduction={'r_local': 2, 'variants': ['entries']})
    run_offline(cfg)
    reports = run_online(cfg, [[0.3, 2.0e4], [0.8, 4.5e4]])
    assert [r.point.coords for r in reports] == [(0.3, 2.0e4), (0.8, 4.5e4)]
    assert all(r.subdomain == 0 for r in reports)
    with pytest.raises(OutOfDomainError):
        run_online(cfg, [[2.0, 2.0e4]])


def test_training_point_query_reuses_snapshot(tmp_path):
    cfg = tiny(tmp_path, reduction={'r_local': 2, 'variants': ['local']})
    run_offline(cfg)
    experiment = Experiment(cfg)
    corner = ParameterPoint((0.1, 1.0e4))
    truth = experiment.truth(corner)
    key = point_key(cfg, corner)
    assert not experiment.store.exists(f'truth/{key[:16]}.json')
    assert truth.stats['steps'] == 50


def test_hyper_reduced_rows(tmp_path):
    cfg = tiny(
        tmp_path,
        reduction={'r_local': 2, 'variants': ['local', 'coefficients']},
        ecsw={'enabled': True, 'tau': 0.1, 'stride': 2},
    )
    run_offline(cfg)
    reports = run_online(cfg)
    assert len(reports) == 4 * 2 * 2
    hyper = [r for r in reports if r.hyper]
    assert len(hyper) == 8
    assert all(0 <= r.mesh_size <= r.n_elements == 4 for r in hyper)
    assert all(r.mesh_size == 4 for r in reports if not r.hyper)


def test_query_scope_retrains_meshes(tmp_path):
    cfg = tiny(
        tmp_path,
        reduction={'r_local': 2, 'variants': ['entries']},
        ecsw={'enabled': True, 'tau': 0.1, 'scope': 'query'},
        queries={'mode': 'points', 'points': [[0.5, 3.0e4]]},
    )
    run_offline(cfg)
    reports = run_online(cfg)
    assert [r.hyper for r in reports] == [False, True]


def test_simulation_layout(tmp_path):
    cfg = tiny(tmp_path)
    sim = simulate(cfg, ParameterPoint((0.5, 3.0e4)))
    assert sim.displacements.shape == (50, 4)
    assert sim.link_forces.shape == (50, 4)
    assert np.all(sim.displacements[0] == 0)
    assert sim.snapshot().displacements.shape == (4, 50)


def test_quake_seeding(tmp_path):
    per_point = Scenario(tiny(tmp_path, base=QUAKE))
    shared = Scenario(tiny(tmp_path, base=QUAKE, load={'noise': 'shared'}))
    a = ParameterPoint((1.0, 1.0))
    b = ParameterPoint((2.0, 1.0))
    assert per_point.seed(a) != per_point.seed(b)
    assert shared.seed(a) == shared.seed(b)

    model_a, loads_a = shared.build(a)
    _, loads_b = shared.build(b)
    assert loads_a.steps == 300
    assert loads_a.seed == loads_b.seed
    assert not np.array_equal(loads_a.samples, loads_b.samples), 'cutoffs differ'
    assert model_a.n == 3


@pytest.mark.slow
def test_parallel_training_matches_serial(tmp_path):
    serial = tiny(tmp_path / 'serial', reduction={'r_local': 2, 'variants': ['local']})
    parallel = attr.evolve(serial, output=str(tmp_path / 'parallel'), workers=2)
    run_offline(serial)
    run_offline(parallel)
    for point in serial.grid.partition().training_points():
        key = point_key(serial, point)[:16]
        a = (tmp_path / 'serial' / 'snapshots' / f'{key}_u.bin').read_bytes()
        b = (tmp_path / 'parallel' / 'snapshots' / f'{key}_u.bin').read_bytes()
        assert a == b


def test_link_taper(tmp_path):
    point = ParameterPoint((0.5, 3.0e4))
    uniform = Scenario(tiny(tmp_path)).model(point)
    assert {link.k_link for link in uniform.links} == {1.0e7}

    tapered = Scenario(tiny(tmp_path, model={'link_taper': 0.25})).model(point)
    k = [link.k_link for link in tapered.links]
    assert k == pytest.approx([1.0e7, 7.5e6, 5.0e6, 2.5e6])
    assert all(link.A == 0.5 for link in tapered.links)
    assert tapered.links[-1].z_max == pytest.approx(3.0e-3)


def test_speedup_without_timed_runs(finished):
    cfg, _, reports = finished
    assert not cfg.timing.enabled
    assert all(r.speedup and r.speedup > 0 for r in reports), 'single-run wall times'
    rows = pd.read_csv(f'{cfg.output}/timing.csv')
    assert rows['speedup'].notna().all()
