import csv
import json
import os

import numpy as np
import pytest

from unfold_dynamics import acceptance
from unfold_dynamics import manager as manager_module
from unfold_dynamics.config import DEFAULT_SETTINGS
from unfold_dynamics.directions import predicted_flatness
from unfold_dynamics.errors import SchemaError
from unfold_dynamics.invariants import fit_flatness
from unfold_dynamics.manager import UnfoldManager, parse_ray, parse_value

PROBLEMS = os.path.join(os.path.dirname(__file__), '..', 'problems')


@pytest.fixture
def manager(tmp_path):
    return UnfoldManager(no_color=True, out_dir=str(tmp_path / 'out'))


def problem_path(name):
    return os.path.join(PROBLEMS, f'{name}.json')


def test_parse_ray():
    assert parse_ray('0.01,0.5,0.3') == (0.01, 0.5, 0.3)
    for bad in ('0.01,0.5', '0,0.5,0', '0.1,1,0', 'a,b,c'):
        with pytest.raises(SchemaError):
            parse_ray(bad)


def test_parse_value():
    assert parse_value('12') == 12
    assert parse_value('1e-9') == 1e-9
    assert parse_value('1+2j') == 1 + 2j
    assert parse_value('fast') == 'fast'


def test_overrides_win_over_problem_options(manager):
    manager.overrides = {'orbit_budget': 77, 'grid': None}
    _, settings = manager.load(problem_path('one_level'))
    assert settings['orbit_budget'] == 77
    manager.overrides = {}
    _, settings = manager.load(problem_path('one_level'))
    assert settings['orbit_budget'] == 20000


def test_split_payload(manager):
    payload = manager.split(problem_path('example'))
    assert payload['problem'] == 'example'
    assert os.path.exists(os.path.join(manager.out_dir, 'split.json'))


def test_portrait_is_deterministic(manager):
    first = manager.portrait(problem_path('example'), 'C_0', 0.3, grid=2)
    with open(first[1], 'rb') as f:
        svg = f.read()
    with open(first[0]) as f:
        rows = list(csv.reader(f))
    assert rows[0] == ['trajectory', 'index', 't', 're', 'im', 'termination']
    assert any(r[0].startswith('separatrix') for r in rows[1:])
    second = manager.portrait(problem_path('example'), 'C_0', 0.3, grid=2)
    with open(second[1], 'rb') as f:
        assert f.read() == svg


def test_portrait_rejects_unknown_node(manager):
    with pytest.raises(SchemaError):
        manager.portrait(problem_path('example'), 'C_9', 0.0, grid=2)
    with pytest.raises(SchemaError):
        manager.portrait(problem_path('example'), 'E_01', 0.0, grid=2)


def test_stability_sweep_rows(manager):
    rows = manager.stability_sweep(problem_path('example'), grid=2)
    assert [r[0] for r in rows] == ['C_0', 'C_0', 'C_00', 'C_00']
    assert all(r[3] in ('homoclinic', 'none', 'indeterminate') for r in rows)


def test_lavaurs_on_flow(manager):
    rows = manager.lavaurs(problem_path('flow_y2'), 1, 0j, grid=3)
    assert len(rows) == 3
    for y_re, y_im, g_re, g_im, err, f_re, f_im in rows:
        assert abs(complex(g_re, g_im) - complex(f_re, f_im)) < 1e-6


def test_selftest_uses_settings(manager, monkeypatch):
    calls = {}

    def fake_suite(budget=None, full=False, seed=0, only=None):
        calls.update(budget=budget, full=full, seed=seed)
        return {'suite': 'unfold-acceptance', 'full': full, 'seed': seed, 'budget': budget,
                'checks': [{'name': 'splitting', 'title': 'splitting', 'status': 'pass', 'metrics': {}, 'seconds': 0.1}],
                'passed': True, 'failed': [], 'summary': '1/1 checks passed'}

    monkeypatch.setattr(acceptance, 'run_suite', fake_suite)
    manager.overrides = {'seed': 11}
    assert manager.selftest()
    assert calls == {'budget': DEFAULT_SETTINGS['orbit_budget'], 'full': False, 'seed': 11}
    with open(os.path.join(manager.out_dir, 'selftest.json')) as f:
        report = json.load(f)
    assert 'seconds' not in report['checks'][0]


def test_seeded_runs_write_identical_files(tmp_path, monkeypatch):
    real_suite = acceptance.run_suite

    def quick_suite(budget=None, full=False, seed=0, only=None):
        return real_suite(budget=budget, full=full, seed=seed, only=['residues', 'stability', 'levels'])

    monkeypatch.setattr(acceptance, 'run_suite', quick_suite)
    outputs = []
    for run in ('a', 'b'):
        m = UnfoldManager(no_color=True, out_dir=str(tmp_path / run), overrides={'seed': 5})
        m.selftest()
        m.fatou(problem_path('flow_y2'), 1, 0j, grid=4)
        m.directions(problem_path('example'))
        files = {}
        for name in ('selftest.json', 'fatou.csv', 'directions.json'):
            with open(os.path.join(m.out_dir, name), 'rb') as f:
                files[name] = f.read()
        outputs.append(files)
    assert outputs[0] == outputs[1]


def test_flatness_payload_reports_agreement_depth(manager, monkeypatch):
    seen = {}

    def fake_fit(phi, normal, tree, atlas, first, second, xs, budget):
        seen.update(levels=atlas.levels, budget=budget, lams=(first.lam, second.lam))
        mags = 3.0 * np.exp(-0.1 / np.abs(xs))
        return fit_flatness(xs, mags, atlas.levels, predicted_flatness(atlas, first, second))

    monkeypatch.setattr(manager_module, 'flatness_fit', fake_fit)
    payload = manager.flatness(problem_path('one_level'), '0.2,0.7,0', count=5)
    assert seen['levels'] == [1]
    assert seen['budget'] == 20000
    assert seen['lams'][0] == seen['lams'][1]
    assert payload['agreement_depth'] == 0
    assert payload['fit']['predicted'] == 1.0
    assert payload['within_band']
