"""Acceptance checks run by `unfold selftest`.

Each check builds its own problem, runs at a reduced size by default (the
documented sizes with full=True) and reports pass, fail or limited with the
measured quantities.
"""
import logging
import math
import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy import special

from .algebra import ComplexPoly, evaluate_partial_fractions, partial_fractions
from .config import Problem, parse_problem
from .directions import agreement_depth, configuration_pair, direction_atlas, in_x_infinity, residue_profile
from .errors import UnfoldError
from .fatou import DEFAULT_BUDGET, FatouEvaluator, k_normal_form, petal_anchors, petal_points
from .flows import HOMOCLINIC, INDETERMINATE, detect_homoclinic, node_tangencies
from .invariants import (RayDifference, cauchy_heine, cauchy_heine_oracle, conjugacy_translation,
                         flatness_fit, geometric_ray, horn_system, lavaurs_asymptotics, negative_control)
from .maps import ConjugatedMap
from .splitting import COMPACT_LIKE, build_splitting

logger = logging.getLogger(__name__)

PASS = 'pass'
FAIL = 'fail'
LIMITED = 'limited'

# Sample problems; problems/*.json hold the same documents.
EXAMPLE = {
    'schema': 'unfold-problem/1',
    'name': 'example',
    'normal_form': {'unit': [[0, 0, 1]],
                    'curves': [{'gamma': [0]}, {'gamma': [0, 0, 1]}, {'gamma': [0, 1]}]},
    'domain': {'delta': 0.05, 'epsilon': 0.5},
}

FLOW_Y2 = {
    'schema': 'unfold-problem/1',
    'name': 'flow_y2',
    'normal_form': {'unit': [[0, 0, 1]], 'curves': [{'gamma': [0], 'multiplicity': 2}]},
    'domain': {'delta': 0.05, 'epsilon': 0.5},
}

ONE_LEVEL = {
    'schema': 'unfold-problem/1',
    'name': 'one_level',
    'normal_form': {'unit': [[0, 0, 20]], 'curves': [{'gamma': [0]}, {'gamma': [0, 1]}]},
    'perturbation': {'cofactor': [[0, 0, 100]]},
    'domain': {'delta': 0.25, 'epsilon': 0.1},
    'options': {'orbit_budget': 20000},
}

PERTURBED = {
    'schema': 'unfold-problem/1',
    'name': 'perturbed',
    'normal_form': {'unit': [[0, 0, 1], [1, 0, 1]], 'curves': [{'gamma': [0], 'multiplicity': 2}]},
    'perturbation': {'cofactor': [[0, 0, 0.1]]},
    'conjugator': {'cofactor': [[0, 0, 0.1]]},
    'domain': {'delta': 0.05, 'epsilon': 0.25},
}


@dataclass(frozen=True)
class Sizes:
    polynomials: int
    fields: int
    directions: int
    tangency_samples: int
    fatou_points: int
    horn_xs: int
    conjugacy_xs: int
    flatness_points: int
    lavaurs_points: int
    lavaurs_xs: int
    fourier_points: int


QUICK = Sizes(polynomials=40, fields=10, directions=8, tangency_samples=10, fatou_points=20, horn_xs=2,
              conjugacy_xs=2, flatness_points=7, lavaurs_points=8, lavaurs_xs=6, fourier_points=128)
FULL = Sizes(polynomials=200, fields=100, directions=16, tangency_samples=50, fatou_points=50, horn_xs=5,
             conjugacy_xs=5, flatness_points=7, lavaurs_points=20, lavaurs_xs=8, fourier_points=256)


@dataclass
class CheckResult:
    name: str
    title: str
    status: str
    metrics: Dict
    seconds: float = 0.0

    def to_dict(self, timing: bool = True) -> Dict:
        out = {'name': self.name, 'title': self.title, 'status': self.status, 'metrics': self.metrics}
        if timing:
            out['seconds'] = self.seconds
        return out


def problem(doc: Dict) -> Problem:
    return parse_problem(doc)


def _status(ok: bool) -> str:
    return PASS if ok else FAIL


# Checks

def check_splitting(sizes: Sizes, rng, budget: int) -> CheckResult:
    start = time.perf_counter()
    tree = build_splitting(problem(EXAMPLE).field)
    elapsed = time.perf_counter() - start
    nodes = {n.label: n for n in tree.nodes()}
    expected = {'E_0': (0, 2), 'C_0': (2, 2), 'E_00': (2, 3), 'E_01': (2, 2), 'C_00': (3, 3),
                'E_000': (3, 3), 'E_001': (3, 3)}
    found = {label: (nodes[label].e, nodes[label].iota) for label in expected if label in nodes}
    x0 = nodes['C_0'].poly_field if 'C_0' in nodes else None
    x00 = nodes['C_00'].poly_field if 'C_00' in nodes else None
    ok = (found == expected and set(nodes) == set(expected)
          and x0 is not None and x0.allclose(ComplexPoly([0, 0, -1, 1], 'w'), 1e-14)
          and x00 is not None and x00.allclose(ComplexPoly([0, 1, -1], 'w'), 1e-14)
          and elapsed < 1.0)
    return CheckResult('splitting', 'splitting of y(y-x^2)(y-x)', _status(ok),
                       {'nodes': {k: list(v) for k, v in found.items()}, 'elapsed_below_1s': elapsed < 1.0})


def _separated_roots(rng, degree: int, min_gap: float = 0.15) -> List[complex]:
    out: List[complex] = []
    while len(out) < degree:
        z = complex(rng.uniform(-1, 1), rng.uniform(-1, 1))
        if all(abs(z - w) >= min_gap for w in out):
            out.append(z)
    return out


def check_residues(sizes: Sizes, rng, budget: int) -> CheckResult:
    worst_oracle, worst_sum = 0.0, 0.0
    test = 2.0 * np.exp(2j * np.pi * np.arange(7) / 7 + 0.1)
    for i in range(sizes.polynomials):
        degree = int(rng.integers(2, 9))
        leading = complex(rng.uniform(0.5, 2.0), rng.uniform(-1.0, 1.0))
        if i % 2 == 0:
            points = [(r, 1) for r in _separated_roots(rng, degree)]
            known = None
        else:
            distinct = _separated_roots(rng, max(1, degree // 2))
            mults = [1] * len(distinct)
            for _ in range(degree - len(distinct)):
                mults[int(rng.integers(len(distinct)))] += 1
            points = list(zip(distinct, mults))
            known = points
        p = ComplexPoly.from_roots(points, leading=leading)
        terms = partial_fractions(p, known_roots=known)
        exact = 1.0 / p(test)
        approx = evaluate_partial_fractions(terms, test)
        worst_oracle = max(worst_oracle, float(np.max(np.abs(approx - exact) / np.maximum(1.0, np.abs(exact)))))
        total = sum(t.coeff for t in terms if t.order == 1)
        scale = max(1.0, max(abs(t.coeff) for t in terms))
        worst_sum = max(worst_sum, abs(total) / scale)
    ok = worst_oracle <= 1e-10 and worst_sum <= 1e-10
    return CheckResult('residues', 'partial fractions and residue sums', _status(ok),
                       {'polynomials': sizes.polynomials, 'max_oracle_error': worst_oracle,
                        'max_residue_sum': worst_sum})


def _unstable_mu(p: ComplexPoly) -> Optional[complex]:
    """A direction mu on an unstable curve of p (lambda = 1)."""
    for r in residue_profile(p).subset_sums:
        if abs(r) > 1e-9:
            return complex(np.exp(1j * (np.angle(r) + math.pi / 2)))
    return None


def check_stability(sizes: Sizes, rng, budget: int) -> CheckResult:
    stable_cases = indeterminate = contradictions = 0
    for _ in range(sizes.fields):
        degree = int(rng.integers(2, 5))
        p = ComplexPoly.from_roots([(r, 1) for r in _separated_roots(rng, degree, 0.3)])
        for m in range(sizes.directions):
            mu = complex(np.exp(2j * math.pi * (m + rng.uniform(0, 1)) / sizes.directions))
            if not in_x_infinity(p.scale(mu)):
                continue
            stable_cases += 1
            outcome = detect_homoclinic(p, mu).outcome
            if outcome == HOMOCLINIC:
                contradictions += 1
            elif outcome == INDETERMINATE:
                indeterminate += 1
    flips = []
    for p in (ComplexPoly([-1, 0, 1], 'w'), ComplexPoly([0, -1, 0, 1], 'w')):
        mu = _unstable_mu(p)
        on = detect_homoclinic(p, mu).outcome
        off = detect_homoclinic(p, mu * np.exp(0.2j)).outcome
        flips.append({'on_curve': on, 'off_curve': off})
    flipped = any(f['on_curve'] == HOMOCLINIC and f['off_curve'] != HOMOCLINIC for f in flips)
    share = indeterminate / stable_cases if stable_cases else 0.0
    ok = contradictions == 0 and share <= 0.05 and flipped
    return CheckResult('stability', 'stability against homoclinic search', _status(ok),
                       {'stable_cases': stable_cases, 'contradictions': contradictions,
                        'indeterminate_share': share, 'flips': flips})


def _alternates(f: Callable[[complex], complex], angles: List[float], radius: float) -> bool:
    if len(angles) < 2:
        return True
    signs = []
    for a, b in zip(angles, angles[1:] + [angles[0] + 2 * math.pi]):
        m = 0.5 * (a + b)
        e = np.exp(1j * m)
        signs.append(np.sign((f(radius * e) * np.conj(e)).real))
    return all(s != t for s, t in zip(signs, signs[1:] + signs[:1]))


def check_tangencies(sizes: Sizes, rng, budget: int) -> CheckResult:
    prob = problem(EXAMPLE)
    tree = build_splitting(prob.field, prob.radii)
    failures = []
    counts = {}
    for node in tree.nodes():
        if node.nu < 1:
            continue
        if node.kind == COMPACT_LIKE:
            lo, hi = node.radii.rho, 2 * node.radii.rho
        else:
            lo, hi = node.radii.eta / 8, node.radii.eta / 4
        ok_node = 0
        for _ in range(sizes.tangency_samples):
            mu = complex(np.exp(2j * math.pi * rng.uniform()))
            x = complex(1e-3 * prob.radii.delta * np.exp(2j * math.pi * rng.uniform()))
            r = float(rng.uniform(lo, hi))
            ts = node_tangencies(node, mu, x, r)
            lam = x / abs(x)

            def f(t, node=node, mu=mu, lam=lam, x=x):
                return complex(mu * node.field.reduced(lam, x, t))

            good = len(ts) == 2 * node.nu and ts.all_convex and _alternates(f, ts.angles(), r)
            if good:
                ok_node += 1
            else:
                failures.append({'node': node.label, 'found': len(ts), 'expected': 2 * node.nu, 'radius': r})
        counts[node.label] = ok_node
    return CheckResult('tangencies', 'circle tangency counts', _status(not failures),
                       {'passing_samples': counts, 'failures': failures[:5]})


def check_fatou_oracle(sizes: Sizes, rng, budget: int) -> CheckResult:
    prob = problem(FLOW_Y2)
    phi = prob.unfolding_map()
    petals = petal_anchors(phi.normal_field, 0j, prob.radii.epsilon)
    j = next(p.j for p in petals if p.attracting)
    ev = FatouEvaluator(phi, j, 0j, epsilon=prob.radii.epsilon, budget=budget, normal_field=phi.normal_field)
    y = petal_points(ev.petal, ev.epsilon, 1, sizes.fatou_points)
    psi = ev(y)
    shifted = psi + 1.0 / y
    sup_error = float(np.max(np.abs(shifted - np.mean(shifted))))
    abel = float(np.max(ev.abel_residual(y)))
    ok = sup_error <= 1e-8 and abel <= 1e-9
    return CheckResult('fatou-oracle', 'Fatou coordinate of y/(1-y)', _status(ok),
                       {'points': int(y.size), 'sup_error': sup_error, 'abel_residual': abel})


def check_trivial_horn(sizes: Sizes, rng, budget: int) -> CheckResult:
    prob = problem(EXAMPLE)
    phi = prob.unfolding_map()
    xs = np.concatenate([[0j], geometric_ray(2e-3, 0.5, 0.3, sizes.horn_xs - 1)])
    worst = 0.0
    for x in xs:
        system = horn_system(phi, x, L=8, epsilon=prob.radii.epsilon, points=sizes.fourier_points, budget=budget,
                             normal_field=phi.normal_field)
        worst = max(worst, system.max_coefficient())
    return CheckResult('trivial-horn', 'horn maps of a flow', _status(worst <= 1e-6),
                       {'xs': xs.tolist(), 'max_coefficient': worst})


def check_conjugacy(sizes: Sizes, rng, budget: int) -> CheckResult:
    prob = problem(PERTURBED)
    phi = prob.unfolding_map()
    eta = ConjugatedMap(phi, prob.sigma())
    phi_normal, eta_normal = k_normal_form(phi), k_normal_form(eta)
    xs = geometric_ray(1e-2, 0.5, 0.0, sizes.conjugacy_xs)
    kw = {'L': 4, 'epsilon': prob.radii.epsilon, 'points': sizes.fourier_points, 'budget': budget}
    phi_sys = [horn_system(phi, x, normal_field=phi_normal, **kw) for x in xs]
    eta_sys = [horn_system(eta, x, normal_field=eta_normal, **kw) for x in xs]
    witness = conjugacy_translation(phi_sys, eta_sys)
    control = conjugacy_translation(phi_sys, negative_control(eta_sys))
    ok = witness.status == 'consistent' and witness.max_residual <= 1e-5 and control.status == 'rejected'
    return CheckResult('conjugacy', 'conjugacy equivariance', _status(ok),
                       {'status': witness.status, 'c': witness.c, 'max_residual': witness.max_residual,
                        'negative_control': control.status})


def check_flatness(sizes: Sizes, rng, budget: int) -> CheckResult:
    prob = problem(ONE_LEVEL)
    phi = prob.unfolding_map()
    tree = build_splitting(prob.field, prob.radii)
    atlas = direction_atlas(tree)
    first, second = configuration_pair(atlas, 0.0)
    xs = geometric_ray(0.2, 0.7, 0.0, sizes.flatness_points)
    fit = flatness_fit(phi, k_normal_form(phi), tree, atlas, first, second, xs, budget=max(budget, DEFAULT_BUDGET))
    measured = sum(1 for m in fit.magnitudes if m > 1e-13)
    metrics = dict(fit.to_dict(), levels=atlas.levels, measured_points=measured,
                   agreement_depth=agreement_depth(atlas, first, second))
    if fit.vacuous or measured < 4:
        return CheckResult('flatness', 'exponential flatness on one level', LIMITED, metrics)
    ok = fit.within() and fit.K > 0 and fit.r2 >= 0.98
    return CheckResult('flatness', 'exponential flatness on one level', _status(ok), metrics)


def check_generator(sizes: Sizes, rng, budget: int) -> CheckResult:
    prob = problem(PERTURBED)
    phi = prob.unfolding_map()
    petals = petal_anchors(phi.normal_field, 0j, prob.radii.epsilon)
    petal = next(p for p in petals if p.attracting)
    u = np.linspace(0.0, 1.0, sizes.lavaurs_points)
    y = (0.04 + 0.06 * u) * np.exp(1j * (petal.angle + (math.pi / 8) * (2 * u - 1)))
    xs = geometric_ray(1e-2, 0.7, 0.0, sizes.lavaurs_xs)
    c0, c1 = lavaurs_asymptotics(phi, xs, y, petal_j=petal.j, epsilon=prob.radii.epsilon)
    e0, e1 = float(np.max(c0.relative_error)), float(np.max(c1.relative_error))
    ok = e0 <= 1e-4 and e1 <= 1e-4
    return CheckResult('generator', 'Lavaurs field against the generator', _status(ok),
                       {'points': int(y.size), 'x0_relative_error': e0, 'x1_relative_error': e1})


def check_cauchy_heine(sizes: Sizes, rng, budget: int) -> CheckResult:
    rays = [RayDifference(np.exp(1j * math.pi / 8), lambda w: np.exp(-1.0 / w ** 2)),
            RayDifference(np.exp(-1j * math.pi / 8), lambda w: -np.exp(-1.0 / w ** 2))]
    radius = 0.8
    h = cauchy_heine(rays, radius, 6)
    oracle = cauchy_heine_oracle(rays, radius, 6)
    gap = float(np.max(np.abs(h - oracle)))
    # closed form on the negative axis: int_0^{-c} e^{1/w} w^{-(n+1)} dw = (-1)^n Gamma(n, 1/c)
    neg = cauchy_heine([RayDifference(-1.0, lambda w: np.exp(1.0 / w))], radius, 6)
    exact = np.array([(-1) ** n * math.gamma(n) * special.gammaincc(n, 1.0 / radius) for n in range(1, 7)])
    closed = float(np.max(np.abs(neg[1:] * 2j * math.pi - exact)))
    ok = gap <= 1e-8 and closed <= 1e-8
    return CheckResult('cauchy-heine', 'Cauchy-Heine transform', _status(ok),
                       {'oracle_gap': gap, 'closed_form_gap': closed})


def check_levels(sizes: Sizes, rng, budget: int) -> CheckResult:
    atlas = direction_atlas(build_splitting(problem(EXAMPLE).field))
    invariant = True
    for k, e in enumerate(atlas.levels, start=1):
        angles = np.array(atlas.singular_angles(k))
        rotated = np.mod(angles + math.pi / e, 2 * math.pi)
        gaps = np.abs(np.remainder(rotated[:, None] - angles[None, :] + math.pi, 2 * math.pi) - math.pi)
        invariant &= bool(np.all(np.min(gaps, axis=1) <= 1e-12))
    ok = set(atlas.levels) <= {2, 3} and invariant
    return CheckResult('levels', 'level arithmetic', _status(ok),
                       {'levels': atlas.levels, 'rotation_invariant': invariant,
                        'counts': {str(e): len(atlas.singular_angles(k + 1)) for k, e in enumerate(atlas.levels)}})


CHECKS = [('splitting', check_splitting), ('residues', check_residues), ('stability', check_stability),
          ('tangencies', check_tangencies), ('fatou-oracle', check_fatou_oracle), ('trivial-horn', check_trivial_horn),
          ('conjugacy', check_conjugacy), ('flatness', check_flatness), ('generator', check_generator),
          ('cauchy-heine', check_cauchy_heine), ('levels', check_levels)]


def run_check(name: str, check, sizes: Sizes, seed: int, budget: int) -> CheckResult:
    rng = np.random.default_rng(seed)
    start = time.perf_counter()
    try:
        result = check(sizes, rng, budget)
    except UnfoldError as e:
        diagnostics = e.as_dict() if hasattr(e, 'as_dict') else {'error': type(e).__name__, 'message': str(e)}
        result = CheckResult(name, check.__name__[len('check_'):].replace('_', ' '), FAIL, {'error': diagnostics})
        logger.warning('check %s raised %s', name, e)
    result.seconds = time.perf_counter() - start
    return result


def run_suite(budget: Optional[int] = None, full: bool = False, seed: int = 0,
              only: Optional[List[str]] = None) -> Dict:
    sizes = FULL if full else QUICK
    budget = budget or DEFAULT_BUDGET
    results = []
    for name, check in CHECKS:
        if only and name not in only:
            continue
        r = run_check(name, check, sizes, seed, budget)
        logger.info('%s %s: %s (%.2fs)', r.name, r.title, r.status, r.seconds)
        results.append(r)
    failed = [r.name for r in results if r.status == FAIL]
    limited = [r.name for r in results if r.status == LIMITED]
    summary = f"{len(results) - len(failed) - len(limited)}/{len(results)} checks passed"
    if limited:
        summary += f" ({', '.join(limited)} limited)"
    return {
        'suite': 'unfold-acceptance',
        'full': full,
        'seed': seed,
        'budget': budget,
        'checks': [r.to_dict() for r in results],
        'passed': not failed and not limited,
        'failed': failed,
        'limited': limited,
        'summary': summary,
    }


def without_timings(report: Dict) -> Dict:
    """The report as written to selftest.json; timings vary between runs."""
    out = dict(report)
    out['checks'] = [{k: v for k, v in c.items() if k != 'seconds'} for c in report['checks']]
    return out
