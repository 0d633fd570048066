import logging
import os
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .colors import Colors
from .config import (DEFAULT_SETTINGS, Problem, load_problem, load_settings,
                     resolve_settings, save_settings, settings_path)
from .directions import (agreement_depth, build_aleph, check_multi_direction, configuration_pair, default_tuple,
                         direction_atlas, in_x_infinity, node_profile, unstable_curves)
from .errors import ConfigurationError, SchemaError
from .fatou import FatouEvaluator, infinitesimal_generator, k_normal_form, lavaurs_sample, petal_points
from .flows import portrait, stability_sweep
from .invariants import (conjugacy_translation, flatness_fit, geometric_ray, horn_system,
                         negative_control)
from .maps import ConjugatedMap
from .output import map_tasks, write_csv, write_json, write_portrait_svg
from .splitting import SplittingTree, build_splitting

DEFAULT_OUT = 'unfold-out'
PORTRAIT_GRID = 6
PORTRAIT_STEPS = 4000
SWEEP_STEPS = 20000
FLATNESS_COUNT = 7


def parse_ray(text: str) -> Tuple[float, float, float]:
    """'r0,q,angle' with 0 < q < 1."""
    try:
        r0, q, angle = (float(v) for v in text.split(','))
    except ValueError:
        raise SchemaError(f"ray must be 'r0,q,angle', got {text!r}", '--ray')
    if r0 <= 0 or not 0 < q < 1:
        raise SchemaError("ray needs r0 > 0 and 0 < q < 1", '--ray')
    return r0, q, angle


def parse_value(text: str):
    """Settings values from the command line: int, float or complex, else the raw string."""
    for kind in (int, float, complex):
        try:
            return kind(text)
        except ValueError:
            continue
    return text


class UnfoldManager:
    def __init__(self, verbose: bool = False, no_color: bool = False, out_dir: str = DEFAULT_OUT,
                 settings_file: Optional[str] = None, overrides: Optional[Dict] = None):
        self.logger = logging.getLogger(__name__)
        self.verbose = verbose
        self.out_dir = out_dir
        self.settings_path = settings_file or settings_path()
        self.overrides = dict(overrides or {})
        if no_color:
            Colors.disable()

    # Settings operations
    def list_settings(self):
        settings = load_settings(self.settings_path)
        print(f"\n{Colors.BOLD}{Colors.HEADER}Settings ({self.settings_path}){Colors.ENDC}\n")
        for key in sorted(settings):
            changed = settings[key] != DEFAULT_SETTINGS[key]
            mark = f"{Colors.OKCYAN}*{Colors.ENDC}" if changed else ' '
            print(f" {mark} {Colors.BOLD}{key:<16}{Colors.ENDC} {settings[key]}")

    def set_setting(self, key: str, value: str):
        if key not in DEFAULT_SETTINGS:
            raise ConfigurationError(f"Unknown setting '{key}'")
        settings = load_settings(self.settings_path)
        settings[key] = parse_value(value)
        save_settings(settings, self.settings_path)
        print(f"{Colors.OKGREEN}Set {key} = {settings[key]}{Colors.ENDC}")

    def reset_setting(self, key: str):
        if key not in DEFAULT_SETTINGS:
            raise ConfigurationError(f"Unknown setting '{key}'")
        settings = load_settings(self.settings_path)
        settings[key] = DEFAULT_SETTINGS[key]
        save_settings(settings, self.settings_path)
        print(f"{Colors.OKGREEN}Reset {key}{Colors.ENDC}")

    # Helpers
    def load(self, path: str) -> Tuple[Problem, Dict]:
        order = resolve_settings(None, self.overrides, self.settings_path)['series_order']
        problem = load_problem(path, order)
        settings = resolve_settings(problem, self.overrides, self.settings_path)
        self.logger.info('loaded problem %s from %s', problem.name, path)
        return problem, settings

    def artifact(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def _wrote(self, *paths: str):
        for p in paths:
            print(f"{Colors.OKGREEN}Wrote {p}{Colors.ENDC}")

    def _ray(self, ray: Optional[str], count: int) -> np.ndarray:
        if ray is None:
            return np.zeros(1, dtype=complex)
        r0, q, angle = parse_ray(ray)
        return geometric_ray(r0, q, angle, count)

    def _tree(self, problem: Problem) -> SplittingTree:
        return build_splitting(problem.field, problem.radii)

    def _maps(self, problem: Problem, settings: Dict):
        phi = problem.unfolding_map(settings['series_order'])
        normal = k_normal_form(phi, settings['normal_form_k'])
        return phi, normal

    # Commands
    def split(self, path: str) -> Dict:
        problem, _ = self.load(path)
        tree = self._tree(problem)
        payload = {'problem': problem.name, 'tree': tree.to_dict()}
        print(f"\n{Colors.BOLD}{'SET':<10} {'KIND':<13} {'e':>3} {'iota':>5} {'nu':>3}  FIELD{Colors.ENDC}")
        for node in tree.nodes():
            fld = ''
            if node.poly_field is not None:
                fld = ' '.join(f"{c.real:+.4g}{c.imag:+.4g}j" for c in node.poly_field.coeffs)
            print(f"{node.label:<10} {node.kind:<13} {node.e:>3} {node.iota:>5} {node.nu:>3}  {fld}")
        self._wrote(write_json(self.artifact('split.json'), payload))
        return payload

    def directions(self, path: str, lam_angle: float = 0.0) -> Dict:
        problem, _ = self.load(path)
        tree = self._tree(problem)
        atlas = direction_atlas(tree)
        nodes = []
        for node in tree.compact_nodes:
            profile = node_profile(node)
            nodes.append({
                'label': node.label,
                'e': node.e,
                'points': [{'point': p, 'multiplicity': m} for p, m in profile.points],
                'residues': profile.residues,
                'stable_for_imaginary_flow': in_x_infinity(node.poly_field.scale(1j), points=node.slopes),
                'unstable_offsets': [c.offset for c in unstable_curves(node)],
            })
        payload = {'problem': problem.name, 'atlas': atlas.to_dict(), 'nodes': nodes}
        if atlas.q:
            tup = default_tuple(atlas, np.exp(1j * lam_angle))
            aleph = build_aleph(atlas, tup, tup.lambdas[0], atlas.q)
            payload['multi_direction'] = {
                'lambdas': tup.lambdas,
                'upsilon': tup.upsilon,
                'samples': aleph.samples(),
                'min_distance': check_multi_direction(atlas, aleph),
            }
        print(f"Levels: {Colors.BOLD}{atlas.levels or 'none'}{Colors.ENDC}")
        for i, e in enumerate(atlas.levels):
            angles = ', '.join(f"{a:.6f}" for a in atlas.singular_angles(i + 1))
            print(f"  level {e}: singular directions at {angles}")
        self._wrote(write_json(self.artifact('directions.json'), payload))
        return payload

    def _node_poly(self, problem: Problem, tree: SplittingTree, label: Optional[str]):
        if label:
            try:
                node = tree.find(label)
            except KeyError:
                raise SchemaError(f"no basic set labelled {label!r}", '--node')
            if node.poly_field is None:
                raise SchemaError(f"{label} is not compact-like", '--node')
            return node.label, node.poly_field
        if tree.compact_nodes:
            node = tree.compact_nodes[0]
            return node.label, node.poly_field
        return tree.root.label, problem.field.at_x(0)

    def portrait(self, path: str, node_label: Optional[str] = None, mu_angle: float = 0.0,
                 grid: Optional[int] = None) -> List[str]:
        problem, settings = self.load(path)
        tree = self._tree(problem)
        label, p = self._node_poly(problem, tree, node_label)
        result = portrait(p, np.exp(1j * mu_angle), grid or PORTRAIT_GRID,
                          max_steps=min(settings['max_steps'], PORTRAIT_STEPS), rtol=max(settings['rtol'], 1e-8))
        rows = []
        for name, traj in result.trajectories:
            for i, (t, w) in enumerate(zip(traj.times, traj.points)):
                if np.isfinite(w):
                    rows.append((name, i, t, w.real, w.imag, traj.termination))
        csv_path = write_csv(self.artifact('portrait.csv'), ['trajectory', 'index', 't', 're', 'im', 'termination'], rows)
        svg_path = write_portrait_svg(self.artifact('portrait.svg'), result, f"{problem.name} {label}")
        self._wrote(csv_path, svg_path)
        return [csv_path, svg_path]

    def stability_sweep(self, path: str, node_label: Optional[str] = None, grid: Optional[int] = None) -> List:
        problem, settings = self.load(path)
        tree = self._tree(problem)
        if node_label:
            targets = [self._node_poly(problem, tree, node_label)]
        elif tree.compact_nodes:
            targets = [(n.label, n.poly_field) for n in tree.compact_nodes]
        else:
            targets = [self._node_poly(problem, tree, None)]
        n_mu = grid or settings['grid']
        kwargs = {'tol': settings['homoclinic_tol'], 'rtol': settings['rtol'],
                  'max_steps': min(settings['max_steps'], SWEEP_STEPS)}
        tables = map_tasks(lambda t: stability_sweep(t[1], n_mu, **kwargs), targets)
        rows = []
        for (label, _), table in zip(targets, tables):
            for angle, stable, outcome in table:
                rows.append((label, angle, stable, outcome))
                if self.verbose or not stable:
                    print(f"{label:<8} arg mu = {angle:.4f}  stable={stable}  {Colors.outcome(outcome)}")
        self._wrote(write_csv(self.artifact('stability.csv'), ['node', 'arg_mu', 'stable', 'homoclinic'], rows))
        return rows

    def _evaluator(self, problem: Problem, settings: Dict, petal: int, x: complex) -> FatouEvaluator:
        phi, normal = self._maps(problem, settings)
        return FatouEvaluator(phi, petal, x, epsilon=problem.radii.epsilon, k=settings['normal_form_k'],
                              budget=settings['orbit_budget'], tol=settings['orbit_tol'], normal_field=normal)

    def fatou(self, path: str, petal: int, x: complex = 0j, grid: Optional[int] = None) -> List:
        problem, settings = self.load(path)
        ev = self._evaluator(problem, settings, petal, x)
        y = petal_points(ev.petal, ev.epsilon, ev.normal_field.nu, grid or settings['grid'])
        value = ev.evaluate(y)
        image = ev.phi(ev.x, y)
        inside = np.abs(image) < ev.epsilon
        abel = np.full(y.shape, np.nan)
        if np.any(inside):
            abel[inside] = ev.abel_residual(y[inside])
        rows = [(p.real, p.imag, v.real, v.imag, r, int(s), a)
                for p, v, r, s, a in zip(y, value.psi, value.residual, value.steps, abel)]
        worst_abel = float(np.nanmax(abel)) if np.any(inside) else float('nan')
        kind = 'attracting' if ev.petal.attracting else 'repelling'
        print(f"Petal {ev.petal.j} ({kind}) at x = {ev.x}: max residual {float(np.max(value.residual)):.3e}, "
              f"max Abel residual {worst_abel:.3e}")
        header = ['y_re', 'y_im', 'psi_re', 'psi_im', 'residual', 'steps', 'abel_residual']
        self._wrote(write_csv(self.artifact('fatou.csv'), header, rows))
        return rows

    def lavaurs(self, path: str, petal: int, x: complex = 0j, grid: Optional[int] = None) -> List:
        problem, settings = self.load(path)
        ev = self._evaluator(problem, settings, petal, x)
        y = petal_points(ev.petal, ev.epsilon, ev.normal_field.nu, grid or settings['grid'])
        sample = lavaurs_sample(ev, y, h=1e-4 * ev.epsilon)
        gen = infinitesimal_generator(ev.phi, settings['series_order'])
        formal = gen(ev.x, y)
        rows = [(p.real, p.imag, g.real, g.imag, err, f.real, f.imag)
                for p, g, err, f in zip(y, sample.g, sample.error, formal)]
        print(f"Lavaurs field on petal {ev.petal.j} at x = {ev.x}: "
              f"max |g - G| {float(np.max(np.abs(sample.g - formal))):.3e}")
        header = ['y_re', 'y_im', 'g_re', 'g_im', 'error', 'generator_re', 'generator_im']
        self._wrote(write_csv(self.artifact('lavaurs.csv'), header, rows))
        return rows

    def _horn_systems(self, phi, normal, problem: Problem, settings: Dict, xs: Sequence[complex], levels: int):
        def task(x):
            return horn_system(phi, x, L=levels, epsilon=problem.radii.epsilon, k=settings['normal_form_k'],
                               points=settings['fourier_points'], budget=settings['orbit_budget'],
                               normal_field=normal, period_tol=settings['dynamical_tol'])

        return map_tasks(task, list(xs))

    def horn(self, path: str, ray: Optional[str] = None, levels: Optional[int] = None, count: int = 5) -> Dict:
        problem, settings = self.load(path)
        phi, normal = self._maps(problem, settings)
        L = levels or settings['horn_levels']
        xs = self._ray(ray, count)
        systems = self._horn_systems(phi, normal, problem, settings, xs, L)
        worst = max(s.max_coefficient() for s in systems)
        payload = {'problem': problem.name, 'levels': L, 'flow': phi.is_flow, 'max_coefficient': worst,
                   'systems': [s.to_dict() for s in systems]}
        for s in systems:
            print(f"x = {s.x:.6g}: zeta = {s.zeta.value:.10g} ({s.zeta.convention}), "
                  f"max |a_(j,l>=1)| = {s.max_coefficient():.3e}")
        self._wrote(write_json(self.artifact('horn.json'), payload))
        return payload

    def flatness(self, path: str, ray: str, count: int = FLATNESS_COUNT) -> Dict:
        problem, settings = self.load(path)
        phi, normal = self._maps(problem, settings)
        tree = self._tree(problem)
        atlas = direction_atlas(tree)
        _, _, angle = parse_ray(ray)
        first, second = configuration_pair(atlas, angle)
        xs = self._ray(ray, count)
        fit = flatness_fit(phi, normal, tree, atlas, first, second, xs, budget=settings['orbit_budget'])
        rows = [(x.real, x.imag, abs(x), m) for x, m in zip(xs, fit.magnitudes)]
        csv_path = write_csv(self.artifact('flatness.csv'), ['x_re', 'x_im', 'abs_x', 'difference'], rows)
        payload = {'problem': problem.name, 'levels': atlas.levels,
                   'agreement_depth': agreement_depth(atlas, first, second),
                   'fit': fit.to_dict(), 'within_band': fit.within()}
        json_path = write_json(self.artifact('flatness.json'), payload)
        if fit.vacuous:
            print(f"Flatness fit: {Colors.outcome('vacuous')}")
        else:
            print(f"Flatness fit: exponent {fit.exponent:.4f}, K {fit.K:.4g}, R^2 {fit.r2:.5f}")
        self._wrote(csv_path, json_path)
        return payload

    def conjugacy(self, path: str, ray: Optional[str] = None, count: int = 5, levels: Optional[int] = None) -> Dict:
        problem, settings = self.load(path)
        sigma = problem.sigma()
        if sigma is None:
            raise SchemaError("conjugacy needs a conjugator section", '$.conjugator')
        phi, normal = self._maps(problem, settings)
        eta = ConjugatedMap(phi, sigma)
        eta_normal = k_normal_form(eta, settings['normal_form_k'])
        L = levels or settings['horn_levels']
        xs = self._ray(ray, count)
        phi_systems = self._horn_systems(phi, normal, problem, settings, xs, L)
        eta_systems = self._horn_systems(eta, eta_normal, problem, settings, xs, L)
        witness = conjugacy_translation(phi_systems, eta_systems)
        control = conjugacy_translation(phi_systems, negative_control(eta_systems))
        payload = {'problem': problem.name, 'witness': witness.to_dict(),
                   'max_residual': witness.max_residual, 'negative_control': control.status}
        print(f"Conjugacy: {Colors.outcome(witness.status)} (max residual {witness.max_residual:.3e}); "
              f"negative control {Colors.outcome('pass' if control.status == 'rejected' else 'fail')}")
        self._wrote(write_json(self.artifact('conjugacy.json'), payload))
        return payload

    def selftest(self, budget: Optional[int] = None, full: bool = False) -> bool:
        from .acceptance import run_suite, without_timings
        settings = resolve_settings(None, self.overrides, self.settings_path)
        report = run_suite(budget=budget or settings['orbit_budget'], full=full, seed=settings['seed'])
        for check in report['checks']:
            print(f"{check['name']:<13} {Colors.outcome(check['status']):<20} {check['title']} "
                  f"({check['seconds']:.1f}s)")
        passed = report['passed']
        colour = Colors.OKGREEN if passed else Colors.FAIL
        print(f"{colour}{report['summary']}{Colors.ENDC}")
        self._wrote(write_json(self.artifact('selftest.json'), without_timings(report)))
        return passed

