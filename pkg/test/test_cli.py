import json

import pytest

from grassmann_prom.cli import build_parser, main, parse_points
from grassmann_prom.constants import EXIT_CONFIG_ERROR, EXIT_NUMERIC_ERROR, EXIT_OK
from grassmann_prom.errors import ConfigError
from grassmann_prom.storage import ArtifactStore

POINT_CASES = [
    ('0.5,2e4', [[0.5, 2e4]]),
    ('0.5,2e4;0.7,3e4', [[0.5, 2e4], [0.7, 3e4]]),
    ('1,2;', [[1.0, 2.0]]),
    ('', []),
]


@pytest.mark.parametrize('text,expected', POINT_CASES)
def test_parse_points(text, expected):
    assert parse_points(text) == expected


def test_parse_points_invalid():
    with pytest.raises(ConfigError):
        parse_points('0.5,abc')


def test_parser_requires_a_command():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
    argv = ['online', '--config', 'x.json', '--points', '1,2']
    args = build_parser().parse_args(argv)
    assert args.command == 'online' and args.points == '1,2'


def test_missing_config(tmp_path):
    code = main(['offline', '--config', str(tmp_path / 'missing.json')])
    assert code == EXIT_CONFIG_ERROR


def test_invalid_config(tmp_path):
    path = tmp_path / 'bad.json'
    path.write_text(json.dumps({'name': 'bad'}))
    assert main(['-q', 'offline', '--config', str(path)]) == EXIT_CONFIG_ERROR


def test_online_without_offline(tmp_path):
    config = {
        'name': 'cli',
        'output': str(tmp_path / 'out'),
        'model': {
            'scenario': 'bouc_wen',
            'stories': 2,
            'story_mass': 1000.0,
            'story_stiffness': 4.0e7,
            'damping_ratio': 0.02,
            'k_link': 1.0e7,
            'z_max_scale': 1.0e-7,
        },
        'load': {'total_s': 0.1, 'amplitude': 1.0e4, 'freq_hz': 2.0},
        'grid': {
            'axes': [
                {'name': 'A', 'lower': 0.1, 'upper': 1.0},
                {'name': 'z_max', 'lower': 1.0e4, 'upper': 5.0e4},
            ],
            'divisions': [1, 1],
        },
        'reduction': {'r_local': 1},
    }
    path = tmp_path / 'cli.json'
    path.write_text(json.dumps(config))
    assert main(['-q', 'online', '--config', str(path)]) == EXIT_CONFIG_ERROR
    bad_points = ['-q', 'online', '--config', str(path), '--points', 'a,b']
    assert main(bad_points) == EXIT_CONFIG_ERROR


def test_report_on_empty_directory(tmp_path, capsys):
    assert main(['-q', 'report', '--out', str(tmp_path)]) == EXIT_OK
    assert '(no rows)' in capsys.readouterr().out


def test_verify_suite(capsys):
    assert main(['-q', 'verify', '--suites', 'metrics']) == EXIT_OK
    assert 'error_metric_identity' in capsys.readouterr().out


def test_verify_unknown_suite():
    assert main(['-q', 'verify', '--suites', 'metrics,nothing']) == EXIT_CONFIG_ERROR


def test_verify_reports_failed_orderings(tmp_path):
    store = ArtifactStore(tmp_path)
    rows = 'variant,hyper,re_u\nglobal,False,0.05\nlocal,False,0.1\n'
    store.write_bytes('online.csv', rows.encode('utf-8'))
    store.save_manifest()
    code = main(['-q', 'verify', '--suites', 'metrics', '--out', str(tmp_path)])
    assert code == EXIT_NUMERIC_ERROR


def write_coefficient_rows(path, re_u, re_rf):
    store = ArtifactStore(path)
    rows = f'variant,hyper,re_u,re_rf\ncoefficients,False,{re_u},{re_rf}\n'
    store.write_bytes('online.csv', rows.encode('utf-8'))
    store.save_manifest()


REFINEMENT_CASES = [
    ((0.05, 0.1), EXIT_OK),
    ((0.05, 0.3), EXIT_NUMERIC_ERROR),
]


@pytest.mark.parametrize('refined, expected', REFINEMENT_CASES)
def test_verify_refinement(tmp_path, capsys, refined, expected):
    write_coefficient_rows(tmp_path / 'a', 0.1, 0.2)
    write_coefficient_rows(tmp_path / 'b', *refined)
    args = ['verify', '--suites', 'metrics', '--out', str(tmp_path / 'b')]
    assert main(['-q', *args, '--coarse', str(tmp_path / 'a')]) == expected
    assert 'refinement_re_rf' in capsys.readouterr().out


def test_verify_coarse_needs_out(tmp_path):
    code = main(['-q', 'verify', '--suites', 'metrics', '--coarse', str(tmp_path)])
    assert code == EXIT_CONFIG_ERROR
