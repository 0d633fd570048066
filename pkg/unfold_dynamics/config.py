import os
import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from .algebra import BiSeries, ComplexPoly, FixedCurveSet
from .errors import ConfigurationError, SchemaError, SeriesError
from .maps import Conjugator, UnfoldingMap
from .splitting import Radii, VectorFieldUnfolding

SCHEMA_VERSION = "unfold-problem/1"

DEFAULT_SETTINGS = {
    "dynamical_tol": 1e-8,
    "series_order": 20,
    "normal_form_k": None,
    "rtol": 1e-9,
    "max_steps": 1000000,
    "homoclinic_tol": 1e-3,
    "fourier_points": 256,
    "horn_levels": 8,
    "orbit_budget": 20000,
    "orbit_tol": 1e-12,
    "seed": 0,
    "grid": 16,
}

DEFAULT_SETTINGS_PATH = os.path.expanduser("~/.unfold_dynamics.json")
SETTINGS_ENV = "UNFOLD_SETTINGS"


def settings_path() -> str:
    return os.environ.get(SETTINGS_ENV, DEFAULT_SETTINGS_PATH)


def load_settings(path: Optional[str] = None) -> Dict:
    path = path or settings_path()
    try:
        if not os.path.exists(path):
            return DEFAULT_SETTINGS.copy()

        with open(path, 'r') as f:
            cfg = json.load(f)

        if not isinstance(cfg, dict):
            raise ConfigurationError("Settings file must contain a JSON object")
        unknown = sorted(set(cfg) - set(DEFAULT_SETTINGS))
        if unknown:
            raise ConfigurationError(f"Unknown settings: {', '.join(unknown)}")

        merged = DEFAULT_SETTINGS.copy()
        merged.update(cfg)
        return merged
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"Invalid JSON in settings file: {e}")
    except ConfigurationError:
        raise
    except Exception as e:
        raise ConfigurationError(f"Failed to load settings: {e}")


def save_settings(settings: Dict, path: Optional[str] = None):
    path = path or settings_path()
    try:
        with open(path, 'w') as f:
            json.dump(settings, f, indent=2)
    except Exception as e:
        raise ConfigurationError(f"Failed to save settings: {e}")


# Problem files

def parse_complex(value: Any, location: str) -> complex:
    if isinstance(value, bool):
        raise SchemaError("expected a number or a [re, im] pair", location)
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                                           for v in value):
        return complex(value[0], value[1])
    raise SchemaError("expected a number or a [re, im] pair", location)


def encode_complex(z: complex) -> Any:
    z = complex(z)
    return z.real if z.imag == 0 else [z.real, z.imag]


def _monomials(value: Any, location: str, order: int) -> BiSeries:
    if not isinstance(value, list):
        raise SchemaError("expected a list of [i, j, c] monomials", location)
    terms = []
    for n, item in enumerate(value):
        loc = f"{location}[{n}]"
        if not isinstance(item, list) or len(item) != 3:
            raise SchemaError("expected [i, j, c]", loc)
        i, j = item[0], item[1]
        if not all(isinstance(v, int) and not isinstance(v, bool) and v >= 0 for v in (i, j)):
            raise SchemaError("exponents must be nonnegative integers", loc)
        if i + j > order:
            raise SchemaError(f"monomial degree exceeds series order {order}", loc)
        terms.append((i, j, parse_complex(item[2], f"{loc}[2]")))
    return BiSeries.from_terms(terms, order)


def _curves(value: Any, location: str) -> List[Tuple[ComplexPoly, int]]:
    if not isinstance(value, list) or not value:
        raise SchemaError("expected a nonempty list of curves", location)
    out = []
    for n, item in enumerate(value):
        loc = f"{location}[{n}]"
        if not isinstance(item, dict) or 'gamma' not in item:
            raise SchemaError("curve needs a 'gamma' coefficient list", loc)
        gamma = item['gamma']
        if not isinstance(gamma, list) or not gamma:
            raise SchemaError("expected ascending coefficients in x", f"{loc}.gamma")
        coeffs = [parse_complex(c, f"{loc}.gamma[{k}]") for k, c in enumerate(gamma)]
        if coeffs[0] != 0:
            raise SchemaError("fixed curve must pass through the origin", f"{loc}.gamma[0]")
        mult = item.get('multiplicity', 1)
        if not isinstance(mult, int) or isinstance(mult, bool) or mult < 1:
            raise SchemaError("multiplicity must be a positive integer", f"{loc}.multiplicity")
        out.append((ComplexPoly(coeffs, 'x'), mult))
    return out


@dataclass
class Problem:
    name: str
    field: VectorFieldUnfolding
    cofactor: BiSeries
    radii: Radii
    options: Dict = field(default_factory=dict)
    conjugator: Optional[BiSeries] = None
    source: Optional[str] = None

    @property
    def curves(self) -> FixedCurveSet:
        return self.field.curves

    def unfolding_map(self, order: Optional[int] = None) -> UnfoldingMap:
        order = order or self.cofactor.order
        return UnfoldingMap(self.field, self.cofactor, order)

    def sigma(self) -> Optional[Conjugator]:
        if self.conjugator is None:
            return None
        return Conjugator(self.conjugator, self.curves)


def parse_problem(doc: Any, order: int = DEFAULT_SETTINGS["series_order"], name: str = "problem") -> Problem:
    if not isinstance(doc, dict):
        raise SchemaError("problem must be a JSON object")
    if doc.get('schema') != SCHEMA_VERSION:
        raise SchemaError(f"schema must be {SCHEMA_VERSION!r}", "$.schema")
    options = doc.get('options', {})
    if not isinstance(options, dict):
        raise SchemaError("expected an object", "$.options")
    unknown = sorted(set(options) - set(DEFAULT_SETTINGS))
    if unknown:
        raise SchemaError(f"unknown options: {', '.join(unknown)}", "$.options")
    order = int(options.get('series_order', order))

    nf = doc.get('normal_form')
    if not isinstance(nf, dict):
        raise SchemaError("missing normal_form section", "$.normal_form")
    unit = _monomials(nf.get('unit', [[0, 0, 1]]), "$.normal_form.unit", order)
    raw_curves = _curves(nf.get('curves'), "$.normal_form.curves")
    try:
        curves = FixedCurveSet(raw_curves)
    except SeriesError as e:
        raise SchemaError(str(e), "$.normal_form.curves")
    if abs(unit.coefficient(0, 0)) == 0:
        raise SchemaError("unit must not vanish at the origin", "$.normal_form.unit")
    x_exponent = nf.get('x_exponent', 0)
    if not isinstance(x_exponent, int) or isinstance(x_exponent, bool) or x_exponent < 0:
        raise SchemaError("x_exponent must be a nonnegative integer", "$.normal_form.x_exponent")
    vf = VectorFieldUnfolding(unit, curves, x_exponent)

    pert = doc.get('perturbation', {})
    if not isinstance(pert, dict):
        raise SchemaError("expected an object", "$.perturbation")
    cofactor = _monomials(pert.get('cofactor', []), "$.perturbation.cofactor", order)

    conj = doc.get('conjugator')
    conjugator = None
    if conj is not None:
        if not isinstance(conj, dict):
            raise SchemaError("expected an object", "$.conjugator")
        conjugator = _monomials(conj.get('cofactor', []), "$.conjugator.cofactor", order)

    dom = doc.get('domain', {})
    if not isinstance(dom, dict):
        raise SchemaError("expected an object", "$.domain")
    radii_kw = {}
    for key in ('delta', 'epsilon'):
        if key in dom:
            v = dom[key]
            if not isinstance(v, (int, float)) or isinstance(v, bool) or v <= 0:
                raise SchemaError("must be a positive number", f"$.domain.{key}")
            radii_kw[key] = float(v)
    return Problem(doc.get('name', name), vf, cofactor, Radii(**radii_kw), dict(options), conjugator)


def load_problem(path: str, order: int = DEFAULT_SETTINGS["series_order"]) -> Problem:
    try:
        with open(path, 'r') as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise SchemaError(f"Invalid JSON in problem file: {e}")
    except OSError as e:
        raise SchemaError(f"Failed to read problem file: {e}")
    problem = parse_problem(doc, order, name=os.path.splitext(os.path.basename(path))[0])
    problem.source = path
    return problem


def problem_to_dict(problem: Problem) -> Dict:
    """Inverse of parse_problem up to monomial ordering."""
    def monomials(series: BiSeries) -> List:
        return [[i, j, encode_complex(c)] for (i, j), c in sorted(series.terms().items())]

    doc = {
        'schema': SCHEMA_VERSION,
        'name': problem.name,
        'normal_form': {
            'unit': monomials(problem.field.unit),
            'curves': [{'gamma': [encode_complex(c) for c in g.coeffs],
                        'multiplicity': n} for g, n in problem.curves],
        },
        'perturbation': {'cofactor': monomials(problem.cofactor)},
        'domain': {'delta': problem.radii.delta, 'epsilon': problem.radii.epsilon},
        'options': problem.options,
    }
    if problem.field.x_exponent:
        doc['normal_form']['x_exponent'] = problem.field.x_exponent
    if problem.conjugator is not None:
        doc['conjugator'] = {'cofactor': monomials(problem.conjugator)}
    return doc


def resolve_settings(problem: Optional[Problem] = None, overrides: Optional[Dict] = None,
                     path: Optional[str] = None) -> Dict:
    """Defaults, then the user settings file, then problem options, then command-line flags."""
    settings = load_settings(path)
    if problem is not None:
        settings.update(problem.options)
    for key, value in (overrides or {}).items():
        if value is not None:
            settings[key] = value
    return settings
