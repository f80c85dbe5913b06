import json

import pytest
import yaml

from process.cli import parse_range, run
from solve.one_barrier import find_bstar
from utils.errors import ConfigError
from utils.output import read_csv

from helpers import reference


MU23 = reference('model_mu23.json')
MU24 = reference('model_mu24.json')
RATIONAL = reference('reward_rational.json')


def _result(path):
    with open(path) as f:
        data = json.load(f)
    assert set(data) == {'header', 'result'}
    return data['header'], data['result']


def test_scale_table(tmp_path):
    out = tmp_path / 'w.csv'
    assert run(['scale', '--model', MU24, '--grid', '0:2:0.5', '--out', str(out)]) == 0
    table = read_csv(out)
    assert list(table.columns) == ['x', 'W', 'W1', 'W2', 'Z']
    assert table['x'].tolist() == [0.0, 0.5, 1.0, 1.5, 2.0]
    with open(out) as f:
        first = f.readline()
    assert first.startswith('# ')


def test_one_barrier_output(tmp_path):
    out = tmp_path / 'one.json'
    grid = tmp_path / 'grid.csv'
    assert run(['one-barrier', '--model', MU23, '--reward', RATIONAL, '--out', str(out),
                '--grid-out', str(grid)]) == 0
    header, result = _result(out)
    assert header['command'] == 'one-barrier'
    assert header['config']['model_spec'] == {'mu': 2.3, 'sigma': 2.0, 'q': 0.2}
    assert result['bstar'] == pytest.approx(0.8925, abs=2e-3)
    assert result['decrF1_holds'] is False
    assert len(read_csv(grid)) == 4001


def test_verify_exit_codes(tmp_path, sf23, rational):
    out = tmp_path / 'verify.json'
    assert run(['verify', '--model', MU24, '--reward', RATIONAL, '--barriers', '0.9165', '--out', str(out)]) == 1
    assert _result(out)[1]['verdict'] == 'fail'

    bstar = find_bstar(sf23, rational).bstar
    assert run(['verify', '--model', MU23, '--reward', RATIONAL, '--barriers', repr(bstar),
                '--out', str(out), '--csv', str(tmp_path / 'verify.csv')]) == 0
    assert _result(out)[1]['verdict'] == 'pass'
    assert list(read_csv(tmp_path / 'verify.csv').columns) == ['x', 'genV', 'g_minus_Vprime']


@pytest.mark.parametrize('argv', [
    ['scale', '--model', 'missing.json', '--out', 'x.csv'],
    ['verify', '--model', MU24, '--reward', RATIONAL, '--barriers', '1.0,2.0', '--out', 'x.json'],
    ['scale', '--model', MU24, '--grid', '0:1', '--out', 'x.csv'],
    ['bogus'],
    [],
])
def test_input_errors(tmp_path, monkeypatch, argv):
    monkeypatch.chdir(tmp_path)
    assert run(argv) == 2


def test_solve_writes_barriers_and_trace(tmp_path):
    out = tmp_path / 'solve.json'
    trace = tmp_path / 'trace.csv'
    assert run(['--quiet', 'solve', '--model', MU24, '--reward', RATIONAL, '--out', str(out),
                '--trace', str(trace)]) == 0
    _, result = _result(out)
    assert result['n'] == 1
    assert result['barriers'][1] == pytest.approx(1.1496, abs=2e-3)
    assert list(read_csv(trace).columns) == ['stage', 'k', 'v', 'z', 'F', 'genH']


def test_solve_convergence_failure(tmp_path):
    reward = tmp_path / 'exp.json'
    reward.write_text(json.dumps({'kind': 'exp', 'beta': -0.2}))
    assert run(['solve', '--model', MU24, '--reward', str(reward), '--out', str(tmp_path / 's.json')]) == 3


def test_simulate(tmp_path):
    out = tmp_path / 'sim.json'
    trace = tmp_path / 'paths.csv'
    assert run(['simulate', '--model', MU23, '--reward', RATIONAL, '--barriers', '0.8925', '--x0', '0.5',
                '--paths', '200', '--dt', '0.01', '--horizon', '5', '--seed', '3', '--bridge',
                '--out', str(out), '--trace', '3', '--trace-out', str(trace)]) == 0
    header, result = _result(out)
    assert header['config']['simulation']['n_paths'] == 200
    assert header['config']['simulation']['bridge_correction'] is True
    assert {'mean', 'stderr', 'analytic', 'ci95'} <= set(result)
    assert set(read_csv(trace)['path']) <= {0, 1, 2}


def test_sweep(tmp_path):
    out = tmp_path / 'surface.csv'
    curve = tmp_path / 'curve.csv'
    assert run(['sweep', '--model', MU24, '--reward', RATIONAL, '--barriers', '0.9165', '--v', '0.92:1.5:4',
                '--z', '0.9:4:10', '--out', str(out), '--curve-out', str(curve)]) == 0
    assert list(read_csv(out).columns) == ['v', 'z', 'F', 'dFdz']
    assert len(read_csv(curve)) == 4


def test_batch(tmp_path):
    config = {
        'version': '1.0',
        'global': {'output_dir': str(tmp_path / 'output'), 'overwrite': True,
                   'hjb': {'n_points': 2000, 'dense_points': 2000}},
        'cases': {'mu23': {'model': MU23, 'reward': RATIONAL, 'x0': [0.5]}},
        'processing_steps': [{'name': 'solve', 'enabled': True}, {'name': 'verify', 'enabled': True},
                             {'name': 'simulate', 'enabled': False}],
    }
    path = tmp_path / 'config.yaml'
    path.write_text(yaml.safe_dump(config))
    assert run(['batch', str(path)]) == 0
    _, solved = _result(tmp_path / 'output' / 'mu23_solve.json')
    assert solved['stopped_reason'] == 'condition_ineq1'
    _, verified = _result(tmp_path / 'output' / 'mu23_verify.json')
    assert verified['verdict'] == 'pass'
    assert (tmp_path / 'output' / 'mu23_trace.csv').exists()
    assert not (tmp_path / 'output' / 'mu23_simulate.json').exists()


def test_missing_config_is_an_input_error(tmp_path):
    assert run(['batch', str(tmp_path / 'none.yaml')]) == 2


def test_parse_range():
    assert parse_range('0:10:0.5') == (0.0, 10.0, 0.5)
    assert parse_range('1:2:5', counted=True) == (1.0, 2.0, 5)
    with pytest.raises(ConfigError):
        parse_range('1:0:0.1')


@pytest.mark.parametrize('command', [
    ['verify', '--out', 'v.json'],
    ['simulate', '--x0', '1.5', '--paths', '100', '--dt', '0.01', '--horizon', '1', '--out', 's.json'],
])
def test_jump_model_with_several_barriers_is_an_input_error(tmp_path, monkeypatch, command):
    monkeypatch.chdir(tmp_path)
    argv = command[:1] + ['--model', reference('model_hyperexp.json'), '--reward', RATIONAL,
                          '--barriers', '0.5,1.0,2.0'] + command[1:]
    assert run(argv) == 2
    assert not (tmp_path / command[-1]).exists()
