import json
import os

import pytest

from unfold_dynamics import cli
from unfold_dynamics.config import DEFAULT_SETTINGS, load_settings
from unfold_dynamics.errors import OrbitError
from unfold_dynamics.manager import UnfoldManager

PROBLEMS = os.path.join(os.path.dirname(__file__), '..', 'problems')


def problem_path(name):
    return os.path.join(PROBLEMS, f'{name}.json')


def run(tmp_path, *argv):
    return cli.run(['--no-color', '--out', str(tmp_path / 'out'), *argv])


def test_no_command_prints_help(tmp_path, capsys):
    assert run(tmp_path) == cli.EXIT_OK
    assert 'usage' in capsys.readouterr().out


def test_split_writes_tree(tmp_path, capsys):
    assert run(tmp_path, 'split', problem_path('example')) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert 'C_00' in out
    with open(tmp_path / 'out' / 'split.json') as f:
        doc = json.load(f)
    assert doc['problem'] == 'example'
    assert doc['tree']


def test_directions(tmp_path):
    assert run(tmp_path, 'directions', problem_path('example')) == cli.EXIT_OK
    with open(tmp_path / 'out' / 'directions.json') as f:
        doc = json.load(f)
    assert [n['label'] for n in doc['nodes']] == ['C_0', 'C_00']
    assert 'multi_direction' in doc


def test_fatou_on_flow(tmp_path):
    assert run(tmp_path, 'fatou', problem_path('flow_y2'), '--petal', '1', '--grid', '3') == cli.EXIT_OK
    with open(tmp_path / 'out' / 'fatou.csv') as f:
        lines = f.read().splitlines()
    assert lines[0] == 'y_re,y_im,psi_re,psi_im,residual,steps,abel_residual'
    assert len(lines) == 4


def test_schema_error_exits_2(tmp_path, capsys):
    bad = tmp_path / 'bad.json'
    bad.write_text(json.dumps({'schema': 'other/1'}))
    assert run(tmp_path, 'split', str(bad)) == cli.EXIT_SCHEMA
    assert '$.schema' in capsys.readouterr().err


def test_conjugacy_without_conjugator_exits_2(tmp_path):
    assert run(tmp_path, 'conjugacy', problem_path('example')) == cli.EXIT_SCHEMA


def test_bad_ray_exits_2(tmp_path):
    assert run(tmp_path, 'horn', problem_path('flow_y2'), '--ray', '0.1,2,0') == cli.EXIT_SCHEMA


def test_numerical_error_writes_error_json(tmp_path, monkeypatch):
    def fail(self, path):
        raise OrbitError('orbit left the petal region', {'step': 3})

    monkeypatch.setattr(UnfoldManager, 'split', fail)
    assert run(tmp_path, 'split', problem_path('example')) == cli.EXIT_NUMERICAL
    with open(tmp_path / 'out' / 'error.json') as f:
        doc = json.load(f)
    assert doc['error'] == 'OrbitError'
    assert doc['diagnostics'] == {'step': 3}


def test_selftest_failure_exits_1(tmp_path, monkeypatch):
    monkeypatch.setattr(UnfoldManager, 'selftest', lambda self, budget=None, full=False: False)
    assert run(tmp_path, 'selftest') == cli.EXIT_SELFTEST


def test_settings_commands(tmp_path, capsys):
    assert run(tmp_path, 'settings', 'set', 'orbit_budget', '7000') == cli.EXIT_OK
    assert load_settings()['orbit_budget'] == 7000
    assert run(tmp_path, 'settings', 'list') == cli.EXIT_OK
    assert 'orbit_budget' in capsys.readouterr().out
    assert run(tmp_path, 'settings', 'reset', 'orbit_budget') == cli.EXIT_OK
    assert load_settings()['orbit_budget'] == DEFAULT_SETTINGS['orbit_budget']
    assert run(tmp_path, 'settings', 'set', 'colour', 'red') == cli.EXIT_SCHEMA


def test_complex_arg():
    assert cli.complex_arg('0.01') == 0.01
    assert cli.complex_arg('0.01+0.02j') == 0.01 + 0.02j
    assert cli.complex_arg('0.01,-0.5') == 0.01 - 0.5j


def test_missing_required_ray_is_a_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run(tmp_path, 'flatness', problem_path('one_level'))
    assert exc.value.code == 2


@pytest.mark.parametrize('argv', [
    ['--budget', '1234', '--petal', '1', '--grid', '3', 'fatou', 'p.json'],
    ['fatou', 'p.json', '--budget', '1234', '--petal', '1', '--grid', '3'],
])
def test_run_flags_before_or_after_command(tmp_path, monkeypatch, argv):
    seen = {}

    def fatou(self, path, petal, x, grid):
        seen.update(petal=petal, grid=grid, overrides=self.overrides)

    monkeypatch.setattr(UnfoldManager, 'fatou', fatou)
    assert run(tmp_path, *argv) == cli.EXIT_OK
    assert seen['petal'] == 1
    assert seen['grid'] == 3
    assert seen['overrides']['orbit_budget'] == 1234


def test_budget_reaches_selftest(tmp_path, monkeypatch):
    seen = {}

    def selftest(self, budget=None, full=False):
        seen['budget'] = budget
        return True

    monkeypatch.setattr(UnfoldManager, 'selftest', selftest)
    assert run(tmp_path, '--budget', '900', 'selftest') == cli.EXIT_OK
    assert seen['budget'] == 900
