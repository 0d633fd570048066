import json
import os

import pytest

from unfold_dynamics.config import (DEFAULT_SETTINGS, load_problem, load_settings, parse_problem, problem_to_dict,
                                    resolve_settings, save_settings, settings_path)
from unfold_dynamics.errors import ConfigurationError, SchemaError

PROBLEMS = os.path.join(os.path.dirname(__file__), '..', 'problems')


@pytest.mark.parametrize('name', ['example', 'flow_y2', 'one_level', 'perturbed'])
def test_sample_problems_load(name):
    problem = load_problem(os.path.join(PROBLEMS, f'{name}.json'))
    assert problem.name == name
    assert problem.source.endswith(f'{name}.json')
    assert problem.curves.total >= 2


def test_example_problem(example_problem):
    assert example_problem.curves.total == 3
    assert example_problem.field.nu == 2
    assert example_problem.radii.delta == 0.05
    assert example_problem.conjugator is None
    assert example_problem.sigma() is None


def test_perturbed_problem_has_conjugator(perturbed_problem):
    assert perturbed_problem.conjugator is not None
    assert perturbed_problem.cofactor.coefficient(0, 0) == 0.1
    assert perturbed_problem.field.unit.coefficient(1, 0) == 1


def test_complex_coefficients(example_doc):
    example_doc['normal_form']['unit'] = [[0, 0, [1.0, 2.0]]]
    problem = parse_problem(example_doc)
    assert problem.field.v00 == 1 + 2j


@pytest.mark.parametrize('edit, location', [
    (lambda d: d.pop('schema'), '$.schema'),
    (lambda d: d['normal_form'].pop('curves'), '$.normal_form.curves'),
    (lambda d: d['normal_form']['curves'][1].update(gamma=[0.5, 0, 1]), '$.normal_form.curves[1].gamma[0]'),
    (lambda d: d['normal_form']['curves'][2].update(multiplicity=0), '$.normal_form.curves[2].multiplicity'),
    (lambda d: d['normal_form'].update(unit=[[0, 0]]), '$.normal_form.unit[0]'),
    (lambda d: d['normal_form'].update(unit=[[1, 0, 1]]), '$.normal_form.unit'),
    (lambda d: d['normal_form'].update(unit=[[0, 0, True]]), '$.normal_form.unit[0][2]'),
    (lambda d: d['domain'].update(delta=-1), '$.domain.delta'),
    (lambda d: d.update(options={'colour': 1}), '$.options'),
])
def test_schema_errors_carry_locations(example_doc, edit, location):
    edit(example_doc)
    with pytest.raises(SchemaError) as exc:
        parse_problem(example_doc)
    assert exc.value.location == location
    assert str(exc.value).startswith(location)


def test_too_few_fixed_points_is_a_schema_error(example_doc):
    example_doc['normal_form']['curves'] = [{'gamma': [0]}]
    with pytest.raises(SchemaError) as exc:
        parse_problem(example_doc)
    assert exc.value.location == '$.normal_form.curves'


def test_unreadable_problem_files(tmp_path):
    bad = tmp_path / 'bad.json'
    bad.write_text('{"schema": ')
    with pytest.raises(SchemaError):
        load_problem(str(bad))
    with pytest.raises(SchemaError):
        load_problem(str(tmp_path / 'missing.json'))


def test_problem_to_dict_reparses(perturbed_problem):
    doc = problem_to_dict(perturbed_problem)
    again = parse_problem(json.loads(json.dumps(doc)))
    assert again.curves.total == perturbed_problem.curves.total
    assert again.cofactor.terms() == perturbed_problem.cofactor.terms()
    assert again.conjugator.terms() == perturbed_problem.conjugator.terms()
    assert again.radii == perturbed_problem.radii


def test_settings_default_without_file():
    assert not os.path.exists(settings_path())
    assert load_settings() == DEFAULT_SETTINGS


def test_settings_save_and_load():
    settings = load_settings()
    settings['orbit_budget'] = 123
    save_settings(settings)
    assert load_settings()['orbit_budget'] == 123
    assert load_settings()['fourier_points'] == DEFAULT_SETTINGS['fourier_points']


def test_unknown_settings_are_rejected():
    with open(settings_path(), 'w') as f:
        json.dump({'orbit_budget': 1, 'speed': 'fast'}, f)
    with pytest.raises(ConfigurationError, match='speed'):
        load_settings()


def test_invalid_settings_json():
    with open(settings_path(), 'w') as f:
        f.write('[1, 2')
    with pytest.raises(ConfigurationError):
        load_settings()


def test_settings_layering(example_doc):
    save_settings({'orbit_budget': 100, 'seed': 4})
    example_doc['options'] = {'orbit_budget': 200, 'grid': 8}
    problem = parse_problem(example_doc)
    settings = resolve_settings(problem, {'orbit_budget': 300, 'grid': None})
    assert settings['orbit_budget'] == 300
    assert settings['grid'] == 8
    assert settings['seed'] == 4
    assert settings['fourier_points'] == DEFAULT_SETTINGS['fourier_points']
