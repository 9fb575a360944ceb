"""
Command-line dispatch: outputs, config echo and replay, exit codes
"""

import csv
import json
import math

import pytest

from fraclab.cli import EXIT_NONCONVERGED, EXIT_OK, EXIT_USAGE, RunConfig, dispatch, read_points
from fraclab.errors import FraclabError


def test_constants_report(capsys):
    code = dispatch(['constants', '--n', '1', '--s', '0.5'])
    out = json.loads(capsys.readouterr().out)
    assert code == EXIT_OK
    assert out['c_ns'] == pytest.approx(1.0 / math.pi)
    assert out['alpha_ns'] is None
    assert out['config']['command'] == 'constants'
    assert out['config']['n'] == 1 and out['config']['s'] == 0.5


def test_psi_table(capsys):
    code = dispatch(['psi-table', '--n', '1', '--s', '0.5', '--r-min', '2', '--r-max', '4',
                     '--points', '3'])
    lines = capsys.readouterr().out.splitlines()
    assert code == EXIT_OK
    assert lines[0] == 'radius,psi,psi_times_decay_power'
    rows = [[float(v) for v in line.split(',')] for line in lines[1:4]]
    assert [row[0] for row in rows] == pytest.approx([2.0, 2.0 * math.sqrt(2.0), 4.0])
    for radius, value, weighted in rows:
        assert value > 0.0
        assert weighted == pytest.approx(value * radius ** 2, rel=1e-12), "n + 2s = 2"


def test_domain_error_exit_code(capsys):
    code = dispatch(['constants', '--n', '1', '--s', '1.5'])
    err = capsys.readouterr().err
    assert code == EXIT_USAGE
    assert '❌ Error' in err
    payload = json.loads(err.strip().splitlines()[-1])
    assert payload['type'] == 'DomainError'


def test_usage_errors(capsys):
    assert dispatch([]) == EXIT_USAGE
    assert dispatch(['constants', '--n', '1']) == EXIT_USAGE
    assert dispatch(['no-such-command']) == EXIT_USAGE
    assert dispatch(['--help']) == EXIT_OK
    capsys.readouterr()


@pytest.mark.integration
def test_poisson_solve_csv(tmp_path, capsys):
    points = tmp_path / 'points.csv'
    points.write_text('x\n0.0\n0.3\n', encoding='utf-8')
    out = tmp_path / 'values.csv'

    code = dispatch(['poisson-solve', '--n', '1', '--s', '0.5', '--data', 'sign',
                     '--points', str(points), '--out', str(out)])
    assert code == EXIT_OK

    with open(out, newline='', encoding='utf-8') as f:
        rows = list(csv.reader(f))
    assert rows[0] == ['x1', 'value', 'error_estimate']
    assert len(rows) == 3
    assert float(rows[1][1]) == pytest.approx(0.0, abs=1e-10)
    assert float(rows[2][1]) == pytest.approx(2.0 / math.pi * math.asin(0.3), abs=1e-7)

    sidecar = json.loads((tmp_path / 'values.csv.config.json').read_text(encoding='utf-8'))
    assert sidecar['config']['options']['data'] == 'sign'
    assert '✅ Wrote' in capsys.readouterr().err


def test_csv_to_stdout_echoes_config_on_stderr(tmp_path, capsys):
    points = tmp_path / 'points.csv'
    points.write_text('0.5\n', encoding='utf-8')
    code = dispatch(['fraclap-eval', '--n', '1', '--s', '0.5', '--field', 'bump2s', '--points', str(points)])
    captured = capsys.readouterr()
    assert code in (EXIT_OK, EXIT_NONCONVERGED)
    assert captured.out.splitlines()[0] == 'x1,value,error_estimate'
    echo = [line for line in captured.err.splitlines() if line.startswith('{')][-1]
    assert json.loads(echo)['config']['options']['field'] == 'bump2s'


def test_quadrature_overrides_are_recorded(capsys):
    dispatch(['constants', '--n', '2', '--s', '0.25', '--rel-tol', '1e-8', '--max-subdiv', '50'])
    config = json.loads(capsys.readouterr().out)['config']
    assert config['quad'] == {'rel_tol': 1e-8, 'max_subdivisions': 50}
    assert RunConfig.from_dict(config).spec.max_subdivisions == 50


@pytest.mark.integration
def test_config_replay_is_byte_identical(tmp_path, capsys):
    out = tmp_path / 'wos.json'
    args = ['wos', '--n', '1', '--s', '0.5', '--domain', 'ball(0,1)', '--data', 'sign',
            '--x0', '0.3', '--samples', '300', '--seed', '4', '--out', str(out)]
    assert dispatch(args) == EXIT_OK
    first = out.read_bytes()
    report = json.loads(first)
    assert report['samples'] == 300 and report['seed'] == 4

    assert dispatch(['--config', str(out)]) == EXIT_OK
    assert out.read_bytes() == first
    capsys.readouterr()


def test_wos_constant_data(capsys):
    code = dispatch(['wos', '--n', '2', '--s', '0.25', '--domain', 'box(-1,-1,1,1)', '--data', 'one',
                     '--x0', '0.2,0.1', '--samples', '50'])
    report = json.loads(capsys.readouterr().out)
    assert code == EXIT_OK
    assert report['estimate'] == 1.0
    assert report['domain'] == 'box(-1,-1,1,1)'


def test_read_points(tmp_path):
    path = tmp_path / 'pts.csv'
    path.write_text('x1,x2\n0,1\n\n2.5,-1\n', encoding='utf-8')
    points = read_points(str(path), 2)
    assert points.tolist() == [[0.0, 1.0], [2.5, -1.0]]
    with pytest.raises(FraclabError):
        read_points(str(path), 3)
    with pytest.raises(FraclabError):
        read_points(str(tmp_path / 'missing.csv'), 2)
    with pytest.raises(FraclabError):
        read_points(None, 2)
