import json
import math
import os

import numpy as np
import pytest

from unfold_dynamics.errors import OrbitError
from unfold_dynamics.output import (format_cell, map_tasks, to_jsonable, worker_count, write_csv, write_error_json,
                                    write_json)


def test_to_jsonable():
    payload = {'z': 1 + 2j, 'arr': np.array([0.5, np.nan]), 'n': np.int64(3), 'ok': np.bool_(True),
               'nested': [(1j, float('inf'))], 1: None}
    assert to_jsonable(payload) == {'z': [1.0, 2.0], 'arr': [0.5, None], 'n': 3, 'ok': True,
                                    'nested': [[[0.0, 1.0], None]], '1': None}


def test_write_json_is_strict(tmp_path):
    path = write_json(str(tmp_path / 'sub' / 'out.json'), {'value': math.nan, 'z': complex(1, math.nan)})
    with open(path) as f:
        text = f.read()
    assert 'NaN' not in text
    assert json.loads(text) == {'value': None, 'z': [1.0, None]}
    assert text.endswith('\n')


def test_format_cell():
    assert format_cell(0.1) == '0.10000000000000001'
    assert format_cell(np.float64(1e-20)) == '9.9999999999999995e-21'
    assert format_cell(math.nan) == 'nan'
    assert format_cell(True) == 'true'
    assert format_cell(7) == '7'
    assert format_cell(None) == ''
    assert format_cell('C_0') == 'C_0'


def test_write_csv_round_trips_floats(tmp_path):
    values = [1 / 3, -2.5e-17, 12345.678]
    path = write_csv(str(tmp_path / 'v.csv'), ['name', 'value'], [('a', v) for v in values])
    with open(path) as f:
        lines = f.read().splitlines()
    assert lines[0] == 'name,value'
    assert [float(line.split(',')[1]) for line in lines[1:]] == values


def test_atomic_write_leaves_no_temporaries(tmp_path):
    write_json(str(tmp_path / 'a.json'), {'a': 1})
    write_json(str(tmp_path / 'a.json'), {'a': 2})
    assert sorted(os.listdir(tmp_path)) == ['a.json']
    with pytest.raises(TypeError):
        write_json(str(tmp_path / 'b.json'), {'bad': object()})
    assert sorted(os.listdir(tmp_path)) == ['a.json']


def test_error_json(tmp_path):
    error = OrbitError('orbit left the petal region', {'x': 0.01 + 0j, 'step': 4})
    path = write_error_json(str(tmp_path / 'error.json'), error)
    with open(path) as f:
        doc = json.load(f)
    assert doc == {'error': 'OrbitError', 'message': 'orbit left the petal region',
                   'diagnostics': {'x': [0.01, 0.0], 'step': 4}}


def test_worker_count_respects_cap(monkeypatch):
    assert worker_count(4) == 4
    monkeypatch.setenv('UNFOLD_THREADS', '2')
    assert worker_count(4) == 2
    assert worker_count(1) == 1
    monkeypatch.setenv('UNFOLD_THREADS', 'many')
    assert worker_count(3) == 3


def test_map_tasks_keeps_order(monkeypatch):
    items = list(range(20))
    assert map_tasks(lambda v: v * v, items, workers=4) == [v * v for v in items]
    monkeypatch.setenv('UNFOLD_THREADS', '1')
    assert map_tasks(lambda v: v * v, items, workers=4) == [v * v for v in items]
    assert map_tasks(lambda v: v, []) == []
