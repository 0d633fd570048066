"""Horn maps, zeta, conjugacy translations, exponential flatness and Cauchy-Heine sums."""
import cmath
import copy
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import legendre
from scipy import integrate
from scipy.optimize import minimize_scalar

from .algebra import BiSeries
from .directions import Configuration, DirectionAtlas, aleph_star, predicted_flatness
from .errors import InvariantError, OrbitError, QuadratureError
from .fatou import (DEFAULT_BUDGET, FatouEvaluator, infinitesimal_generator, k_normal_form, lavaurs_sample,
                    petal_anchors)
from .flows import SINGULARITY, integrate as integrate_flow
from .maps import AnalyticMap, TimeForm
from .splitting import SplittingTree

logger = logging.getLogger(__name__)

FOURIER_POINTS = 256
HOMOTOPY_STEPS = 32
PERIOD_TOL = 1e-8
NUMERICAL_FLOOR = 1e-13
CALIBRATION_POINTS = 16
HEIGHT_MARGIN = 2.0

ZETA_CONVENTIONS: Dict[str, Callable[[int], complex]] = {
    '-pi*i/nu': lambda nu: -1j * math.pi / nu,
    'pi*i/nu': lambda nu: 1j * math.pi / nu,
    '-pi*i*nu': lambda nu: -1j * math.pi * nu,
    'pi*i*nu': lambda nu: 1j * math.pi * nu,
}
DEFAULT_ZETA_CONVENTION = '-pi*i/nu'


# Horn maps

@dataclass
class HornMapSample:
    """xi_j(z) = z + sum_l c_l exp(-2 pi i s l (z - z0)) sampled on the line through z0."""
    j: int
    s: int
    x: complex
    z0: complex
    coefficients: np.ndarray
    residual: float
    height: float

    @property
    def translation(self) -> complex:
        return complex(self.coefficients[0])

    def raw_coefficient(self, l: int) -> complex:
        return complex(self.coefficients[l] * np.exp(2j * math.pi * self.s * l * self.z0))

    def decay_ratio(self, floor: float = 1e-12) -> Optional[float]:
        """Geometric ratio rho of |c_l| for l >= 1, None when fewer than two coefficients exceed the floor."""
        mags = np.abs(self.coefficients[1:])
        ls = np.flatnonzero(mags > floor) + 1
        if ls.size < 2:
            return None
        slope = np.polyfit(ls, np.log(mags[ls - 1]), 1)[0]
        return float(np.exp(slope))

    def rebased(self, b_j: complex, b_next: complex) -> 'HornMapSample':
        """The horn map of psi_j + b_j and psi_{j+1} + b_next."""
        c = np.array(self.coefficients, dtype=complex)
        c[0] += b_next - b_j
        return HornMapSample(self.j, self.s, self.x, self.z0 + b_j, c, self.residual, self.height)

    def to_dict(self) -> Dict:
        return {
            'j': self.j, 's': self.s, 'z0': self.z0, 'height': self.height, 'residual': self.residual,
            'coefficients': [complex(c) for c in self.coefficients],
        }


def _homotopy_invert(form: TimeForm, y_start: complex, w_start: complex, targets: np.ndarray,
                     steps: int = HOMOTOPY_STEPS, tol: float = 1e-12, max_iter: int = 30) -> np.ndarray:
    """Points y with psi_n(y) = target, psi_n continued from (y_start, w_start)."""
    y = np.full(targets.shape, y_start, dtype=complex)
    w = np.full(targets.shape, w_start, dtype=complex)
    for tau in np.linspace(0.0, 1.0, steps + 1)[1:]:
        goal = w_start + tau * (targets - w_start)
        for _ in range(max_iter):
            r = w - goal
            if np.max(np.abs(r)) <= tol * (1.0 + np.max(np.abs(goal))):
                break
            y_new = y - r * form.vector(y)
            w = w + form.increment(y, y_new)
            y = y_new
        else:
            raise OrbitError('normal Fatou coordinate inversion did not converge',
                             {'x': form.x, 'residual': float(np.max(np.abs(w - goal)))})
    return y


def invert_fatou(evaluator: FatouEvaluator, targets, seed: complex, tol: float = 1e-11, max_iter: int = 8) -> np.ndarray:
    """psi_j^{-1}: homotopy on the normal coordinate, then fixed-point correction by the orbit sums."""
    targets = np.atleast_1d(np.asarray(targets, dtype=complex))
    form = evaluator.form
    w_seed = complex(evaluator.normal(seed))
    shift = np.zeros(targets.shape, dtype=complex)
    y = None
    for _ in range(max_iter):
        y = _homotopy_invert(form, seed, w_seed, targets - shift)
        value = evaluator.evaluate(y)
        err = np.abs(value.psi - targets)
        if np.max(err) <= tol * (1.0 + np.max(np.abs(targets))):
            return y
        shift = value.psi - value.normal
    raise OrbitError('Fatou coordinate inversion did not converge', {'x': evaluator.x, 'residual': float(np.max(err))})


def calibrate_height(first: FatouEvaluator, second: FatouEvaluator, seed: complex, psi_seed: complex,
                     grid: int = CALIBRATION_POINTS, max_tries: int = 6) -> float:
    """Smallest ladder height M where petal-transit orbits succeed on a coarse grid of one period."""
    M = abs(psi_seed.imag)
    last_error = None
    for _ in range(max_tries):
        z = psi_seed.real - 1j * first.petal.s * M + np.arange(grid) / grid
        try:
            second.evaluate(invert_fatou(first, z, seed))
        except OrbitError as e:
            last_error = e
            M = 1.5 * M + 1.0
            continue
        logger.debug('horn map j=%d: calibrated overlap height %.3g', first.petal.j, M)
        return M
    raise InvariantError('no overlap height found for the horn map',
                         {'j': first.petal.j, 'x': first.x, 'last': str(last_error)})


def horn_map(first: FatouEvaluator, second: FatouEvaluator, L: int = 8, points: int = FOURIER_POINTS,
             height: Optional[float] = None, max_tries: int = 6, tol: float = PERIOD_TOL,
             seed_radius: float = 0.8) -> HornMapSample:
    """xi = psi_second o psi_first^{-1} on one period of a horizontal line in the overlap.

    Without an explicit height the line sits HEIGHT_MARGIN above the
    calibrated overlap height.
    """
    petal = first.petal
    a0, a1 = petal.angle, second.petal.angle
    # petals are ordered counterclockwise; the overlap lies between them
    mid = a0 + float(np.mod(a1 - a0, 2 * math.pi)) / 2
    seed = complex(seed_radius * first.epsilon * np.exp(1j * mid))
    psi_seed = complex(first(seed))
    M = calibrate_height(first, second, seed, psi_seed) + HEIGHT_MARGIN if height is None else height
    last_error = None
    for attempt in range(max_tries):
        z0 = psi_seed.real - 1j * petal.s * M
        z = z0 + np.arange(points + 1) / points
        try:
            y = invert_fatou(first, z, seed)
            xi = second.evaluate(y).psi
        except OrbitError as e:
            last_error = e
            logger.debug('horn map j=%d: height %.3g failed (%s)', petal.j, M, e)
            M = 1.5 * M + 1.0
            continue
        h = xi[:points] - z[:points]
        residual = float(abs(xi[points] - xi[0] - 1.0))
        if residual > tol:
            last_error = InvariantError('horn map periodicity residual above tolerance',
                                        {'j': petal.j, 'residual': residual, 'height': M})
            M = 1.5 * M + 1.0
            continue
        spectrum = np.fft.ifft(h) if petal.s == 1 else np.fft.fft(h) / points
        logger.debug('horn map j=%d x=%s: height %.3g, residual %.3e, attempts %d', petal.j, first.x, M, residual,
                     attempt + 1)
        return HornMapSample(petal.j, petal.s, first.x, complex(z0), spectrum[:L + 1].copy(), residual, M)
    raise InvariantError('horn map sampling failed at every height',
                         {'j': petal.j, 'x': first.x, 'last': str(last_error)})


@dataclass
class ZetaValue:
    x: complex
    value: complex
    residue_sum: complex
    horn_value: Optional[complex]
    discrepancy: Optional[float]
    convention: str


def zeta(residue_sum: complex, nu: int, translations: Optional[Sequence[complex]] = None, x: complex = 0j,
         tol: float = 1e-6) -> ZetaValue:
    """Residue formula for zeta, with the convention chosen against the horn translation constants."""
    residue_sum = complex(residue_sum)
    if translations is None:
        value = ZETA_CONVENTIONS[DEFAULT_ZETA_CONVENTION](nu) * residue_sum
        return ZetaValue(complex(x), value, residue_sum, None, None, DEFAULT_ZETA_CONVENTION)
    horn_value = complex(sum(translations)) / (2 * nu)
    scored = sorted((abs(f(nu) * residue_sum - horn_value), name) for name, f in ZETA_CONVENTIONS.items())
    best, name = scored[0]
    if best > tol * max(1.0, abs(horn_value)):
        raise InvariantError('no zeta convention matches the horn translation constants',
                             {'x': complex(x), 'horn': horn_value, 'residue_sum': residue_sum, 'discrepancy': best})
    return ZetaValue(complex(x), ZETA_CONVENTIONS[name](nu) * residue_sum, residue_sum, horn_value, best, name)


@dataclass
class HornSystem:
    x: complex
    samples: List[HornMapSample]
    zeta: ZetaValue
    rebased: List[HornMapSample]
    offsets: List[complex]

    @property
    def nu(self) -> int:
        return len(self.samples) // 2

    def coefficient(self, j: int, l: int) -> complex:
        return complex(self.rebased[j].coefficients[l])

    def max_coefficient(self, lmin: int = 1) -> float:
        return max(float(np.max(np.abs(s.coefficients[lmin:]))) for s in self.samples)

    def to_dict(self) -> Dict:
        return {
            'x': self.x,
            'zeta': {'value': self.zeta.value, 'residue_sum': self.zeta.residue_sum, 'horn_value': self.zeta.horn_value,
                     'discrepancy': self.zeta.discrepancy, 'convention': self.zeta.convention},
            'a': [[complex(c) for c in s.coefficients] for s in self.rebased],
            'residuals': [s.residual for s in self.samples],
            'base_points': [s.z0 for s in self.rebased],
            'offsets': self.offsets,
        }


def homogeneous_offsets(translations: Sequence[complex], zeta_value: complex) -> List[complex]:
    """b_j = -sum_{k<j} a_k0 + j*zeta, which makes every translation constant equal to zeta."""
    out, acc = [], 0j
    for j, a in enumerate(translations):
        out.append(-acc + j * zeta_value)
        acc += a
    return out


def fatou_system(phi: AnalyticMap, x: complex, epsilon: float = 0.5, k: Optional[int] = None,
                 budget: int = DEFAULT_BUDGET, tol: float = 1e-12, normal_field=None) -> List[FatouEvaluator]:
    normal_field = normal_field if normal_field is not None else k_normal_form(phi, k)
    count = len(petal_anchors(normal_field, x, epsilon))
    return [FatouEvaluator(phi, j, x, epsilon=epsilon, k=k, budget=budget, tol=tol, normal_field=normal_field)
            for j in range(count)]


def horn_system(phi: AnalyticMap, x: complex, L: int = 8, epsilon: float = 0.5, k: Optional[int] = None,
                points: int = FOURIER_POINTS, budget: int = DEFAULT_BUDGET, normal_field=None,
                zeta_tol: float = 1e-6, period_tol: float = PERIOD_TOL) -> HornSystem:
    """All horn maps at x, zeta, and the homogeneous re-basing."""
    evaluators = fatou_system(phi, x, epsilon, k, budget, normal_field=normal_field)
    n = len(evaluators)
    samples = [horn_map(evaluators[j], evaluators[(j + 1) % n], L, points, tol=period_tol) for j in range(n)]
    translations = [s.translation for s in samples]
    residues = evaluators[0].form.residue_sum()
    z = zeta(residues, n // 2, translations, x, zeta_tol)
    b = homogeneous_offsets(translations, z.value)
    rebased = [samples[j].rebased(b[j], b[(j + 1) % n]) for j in range(n)]
    return HornSystem(complex(x), samples, z, rebased, b)


def perturb_coefficient(system: HornSystem, j: int, l: int, shift: complex) -> HornSystem:
    """A copy with a_{j,l} moved by shift; not the horn system of any map."""
    edited = copy.deepcopy(system)
    edited.rebased[j].coefficients[l] += shift
    edited.samples[j].coefficients[l] += shift
    return edited


def negative_control(systems: Sequence[HornSystem], shift: complex = 1e-3) -> List[HornSystem]:
    """Systems with the first translation constant edited; a conjugacy check must reject them."""
    return [perturb_coefficient(s, 0, 0, shift) for s in systems]


# Conjugacy translations

CONSISTENT = 'consistent'
REJECTED = 'rejected'
UNDETERMINED = 'undetermined'


@dataclass
class ConjugacyWitness:
    xs: List[complex]
    c: List[Optional[complex]]
    statuses: List[str]
    residuals: List[Dict[str, float]]
    translation_residuals: List[float]

    @property
    def status(self) -> str:
        if REJECTED in self.statuses:
            return REJECTED
        if all(s == UNDETERMINED for s in self.statuses):
            return UNDETERMINED
        return CONSISTENT

    @property
    def max_residual(self) -> float:
        vals = [v for r in self.residuals for v in r.values()]
        return max(vals, default=0.0)

    def to_dict(self) -> Dict:
        return {'status': self.status, 'xs': self.xs, 'c': self.c, 'statuses': self.statuses,
                'residuals': self.residuals, 'translation_residuals': self.translation_residuals}


def _solve_translation(cf: complex, ce: complex, s: int, l: int, dz0: complex) -> complex:
    base = cmath.log(ce / cf) / (2j * math.pi * s * l) + dz0
    # branches differ by integers / (s l); c itself is determined modulo 1
    candidates = [base + n / (s * l) for n in range(-2 * l, 2 * l + 1)]
    candidates = [c - round(c.real) for c in candidates]
    return min(candidates, key=abs)


def _translation_at(phi_sys: HornSystem, eta_sys: HornSystem, tol: float, floor: float) -> Tuple:
    n = len(phi_sys.rebased)
    L = len(phi_sys.rebased[0].coefficients) - 1
    pivot = None
    for l in range(1, L + 1):
        mags = [abs(phi_sys.rebased[j].coefficients[l]) for j in range(n)]
        j = int(np.argmax(mags))
        if mags[j] > floor and abs(eta_sys.rebased[j].coefficients[l]) > floor:
            pivot = (j, l)
            break
    trans = max(abs(phi_sys.rebased[j].translation - eta_sys.rebased[j].translation) for j in range(n))
    if trans > tol:
        return None, REJECTED, {}, trans
    if pivot is None:
        return None, UNDETERMINED, {}, trans
    j, l = pivot
    sp, se = phi_sys.rebased[j], eta_sys.rebased[j]
    c = _solve_translation(complex(sp.coefficients[l]), complex(se.coefficients[l]), sp.s, l, se.z0 - sp.z0)
    residuals = {}
    for jj in range(n):
        sp, se = phi_sys.rebased[jj], eta_sys.rebased[jj]
        for ll in range(1, L + 1):
            cf, ce = complex(sp.coefficients[ll]), complex(se.coefficients[ll])
            if abs(cf) <= floor and abs(ce) <= floor:
                continue
            predicted = cf * np.exp(2j * math.pi * sp.s * ll * (c - (se.z0 - sp.z0)))
            residuals[f"{jj},{ll}"] = float(abs(predicted - ce))
    worst = max(residuals.values(), default=0.0)
    status = CONSISTENT if worst <= tol and trans <= tol else REJECTED
    return c, status, residuals, trans


def conjugacy_translation(phi_systems: Sequence[HornSystem], eta_systems: Sequence[HornSystem],
                          tol: float = 1e-5, floor: float = 1e-10) -> ConjugacyWitness:
    """c(x) with a^eta_{j,l} = a^phi_{j,l} exp(2 pi i s l c) for every stored (j, l)."""
    xs, cs, statuses, residuals, trans = [], [], [], [], []
    for ps, es in zip(phi_systems, eta_systems):
        c, status, res, t = _translation_at(ps, es, tol, floor)
        xs.append(ps.x)
        cs.append(c)
        statuses.append(status)
        residuals.append(res)
        trans.append(t)
        logger.debug('conjugacy at x=%s: c=%s status=%s', ps.x, c, status)
    return ConjugacyWitness(xs, cs, statuses, residuals, trans)


def compose_witnesses(first: ConjugacyWitness, second: ConjugacyWitness, direct: ConjugacyWitness) -> List[float]:
    """|c_13 - (c_12 + c_23)| modulo integers, per sampled x."""
    out = []
    for a, b, d in zip(first.c, second.c, direct.c):
        if a is None or b is None or d is None:
            out.append(float('nan'))
            continue
        gap = d - (a + b)
        out.append(float(abs(gap - round(gap.real))))
    return out


# Exponential flatness

def _limit_point(form: TimeForm, mu: complex, start: complex, max_steps: int = 200_000) -> Optional[complex]:
    def f(y):
        return complex(mu * form.vector(y))

    points = [v for v, _ in form.singular]
    traj = integrate_flow(f, start, points, max_steps=max_steps)
    return traj.limit if traj.termination == SINGULARITY else None


def _bilateral_sum(phi: AnalyticMap, form: TimeForm, y: np.ndarray, forward: bool, budget: int,
                   floor: float) -> np.ndarray:
    q = y.copy()
    total = np.zeros(y.shape, dtype=complex)
    x = form.x
    for _ in range(budget):
        nxt = phi(x, q) if forward else phi.inverse(x, q)
        d = form.increment(q, nxt) - 1.0 if forward else form.increment(nxt, q) - 1.0
        total += d if forward else -d
        q = nxt
        if np.max(np.abs(d)) <= floor:
            return total
    logger.warning('orbit sum budget exhausted at x=%s, last |Delta| %.3e', x, float(np.max(np.abs(d))))
    return total


def gate_difference(phi: AnalyticMap, normal_field, x: complex, p0: complex, mu_a: complex, mu_b: complex,
                    samples: int = 16, budget: int = 20000, floor: float = 1e-19) -> np.ndarray:
    """Nonconstant part of psi_B - psi_A on a fundamental segment through p0.

    Each configuration follows Re(mu X) from p0 to its omega-limit; the Fatou
    coordinate sends orbits to that fixed point (forward sums when it attracts
    under phi, backward sums otherwise). Both are normalized at p0.
    """
    form = TimeForm(normal_field, x)
    limits = [_limit_point(form, mu, p0) for mu in (mu_a, mu_b)]
    if any(l is None for l in limits):
        raise OrbitError('configuration flow has no limit point', {'x': complex(x), 'limits': limits})
    forward = [bool(form.dpoly(l).real < 0) for l in limits]
    tau = np.arange(samples) / samples
    pts = np.array([form.flow(p0, t) for t in tau], dtype=complex)
    if forward[0] == forward[1]:
        return np.zeros(samples, dtype=complex)
    sums = [_bilateral_sum(phi, form, pts, fw, budget, floor) for fw in forward]
    diff = sums[1] - sums[0]
    diff = diff - diff[0]
    return diff - np.mean(diff)


@dataclass
class FlatnessFit:
    exponent: Optional[float]
    K: Optional[float]
    r2: Optional[float]
    predicted: Optional[float]
    vacuous: bool
    candidates: List[Dict] = field(default_factory=list)
    xs: List[float] = field(default_factory=list)
    magnitudes: List[float] = field(default_factory=list)

    def within(self, band: Tuple[float, float] = (0.85, 1.15)) -> bool:
        if self.vacuous or self.exponent is None or self.predicted is None:
            return False
        return band[0] * self.predicted <= self.exponent <= band[1] * self.predicted

    def to_dict(self) -> Dict:
        return {'exponent': self.exponent, 'K': self.K, 'r2': self.r2, 'predicted': self.predicted,
                'vacuous': self.vacuous, 'candidates': self.candidates}


def _fit_exponent(r: np.ndarray, logd: np.ndarray, e: float) -> Tuple[float, float, float]:
    A = np.column_stack([np.ones_like(r), -r ** (-e)])
    coef, *_ = np.linalg.lstsq(A, logd, rcond=None)
    pred = A @ coef
    ss_res = float(np.sum((logd - pred) ** 2))
    ss_tot = float(np.sum((logd - np.mean(logd)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return float(coef[1]), r2, ss_res


def fit_flatness(xs: Sequence[complex], magnitudes: Sequence[float], levels: Sequence[float],
                 predicted: Optional[float] = None, floor: float = NUMERICAL_FLOOR,
                 bounds: Tuple[float, float] = (0.2, 4.0)) -> FlatnessFit:
    """Fit log|d| = a - K/|x|^e, scanning e over the levels and refining continuously."""
    r = np.abs(np.asarray(xs, dtype=complex))
    d = np.asarray(magnitudes, dtype=float)
    keep = d > floor
    fit = FlatnessFit(None, None, None, predicted, True, [], r.tolist(), d.tolist())
    if np.count_nonzero(keep) < 3:
        logger.warning('flatness fit vacuous: %d of %d points above the numerical floor', int(np.count_nonzero(keep)),
                       len(d))
        return fit
    r, logd = r[keep], np.log(d[keep])
    for e in sorted(set(float(v) for v in levels)):
        K, r2, _ = _fit_exponent(r, logd, e)
        fit.candidates.append({'exponent': e, 'K': K, 'r2': r2})
    res = minimize_scalar(lambda e: _fit_exponent(r, logd, e)[2], bounds=bounds, method='bounded')
    K, r2, _ = _fit_exponent(r, logd, float(res.x))
    fit.exponent, fit.K, fit.r2, fit.vacuous = float(res.x), K, r2, False
    logger.debug('flatness fit: e=%.4f K=%.4g R2=%.5f over %d points', fit.exponent, K, r2, len(r))
    return fit


def geometric_ray(r0: float, q: float, angle: float, count: int) -> np.ndarray:
    return r0 * q ** np.arange(count) * np.exp(1j * angle)


def flatness_fit(phi: AnalyticMap, normal_field, tree: SplittingTree, atlas: DirectionAtlas, first: Configuration,
                 second: Configuration, xs: Sequence[complex], p0_factor: complex = 0.5, samples: int = 16,
                 budget: int = DEFAULT_BUDGET) -> FlatnessFit:
    """Gate differences of two direction configurations along a ray.

    Each configuration contributes the direction of its multi-direction at
    the gate point. The fit scans the levels and nu; the prediction is the
    level just above the depth where the configurations agree.
    """
    predicted = predicted_flatness(atlas, first, second)
    alephs = [first.aleph(atlas), second.aleph(atlas)]
    mags = []
    for x in xs:
        p0 = complex(p0_factor * x)
        mu_a, mu_b = (aleph_star(a, tree, (complex(x), p0)) for a in alephs)
        diff = gate_difference(phi, normal_field, x, p0, mu_a, mu_b, samples, budget)
        mags.append(float(np.max(np.abs(diff))))
    candidates = sorted(set(float(e) for e in atlas.levels) | {float(phi.curves.nu)})
    return fit_flatness(xs, mags, candidates, predicted)


# Lavaurs field asymptotics

def ray_ratio(xs: Sequence[complex], tol: float = 1e-9) -> complex:
    xs = np.asarray(xs, dtype=complex)
    if xs.size < 2 or np.any(xs == 0):
        raise InvariantError('a geometric ray needs at least two nonzero points', {'count': int(xs.size)})
    ratios = xs[1:] / xs[:-1]
    if np.max(np.abs(ratios - ratios[0])) > tol * abs(ratios[0]):
        raise InvariantError('x samples do not lie on a geometric ray', {'ratios': [complex(r) for r in ratios]})
    return complex(ratios[0])


def richardson(values, ratio: complex, depth: int) -> np.ndarray:
    """Limit at x = 0 of samples at x_i = x_0 ratio^i, eliminating the x^1..x^depth terms.

    values has one row per ray point; the last column of the table is averaged.
    """
    table = np.asarray(values, dtype=complex)
    if table.shape[0] <= depth:
        raise InvariantError('Richardson extrapolation needs more samples than its depth',
                             {'samples': int(table.shape[0]), 'depth': depth})
    for j in range(1, depth + 1):
        f = ratio ** j
        table = (table[1:] - f * table[:-1]) / (1.0 - f)
    return np.mean(table, axis=0)


@dataclass
class GeneratorComparison:
    y: np.ndarray
    fitted: np.ndarray
    generator: np.ndarray

    @property
    def relative_error(self) -> np.ndarray:
        return np.abs(self.fitted - self.generator) / np.abs(self.generator)


def lavaurs_asymptotics(phi: AnalyticMap, xs: Sequence[complex], y_points, petal_j: int = 0, epsilon: float = 0.5,
                        k: Optional[int] = None, degree: int = 3, h: float = 1e-4, order: Optional[int] = None) -> Tuple:
    """x^0 and x^1 coefficients of the Lavaurs field along a geometric ray against the generator coefficients.

    The x^0 coefficient is the Richardson limit of the samples; the x^1
    coefficient is the Richardson limit of consecutive divided differences.
    """
    y_points = np.atleast_1d(np.asarray(y_points, dtype=complex))
    xs = np.asarray(xs, dtype=complex)
    ratio = ray_ratio(xs)
    normal = k_normal_form(phi, k)
    rows = []
    for x in xs:
        ev = FatouEvaluator(phi, petal_j, x, epsilon=epsilon, k=k, normal_field=normal)
        rows.append(lavaurs_sample(ev, y_points, h).g)
    g = np.array(rows)
    c0 = richardson(g, ratio, degree)
    slopes = (g[1:] - g[:-1]) / (xs[1:] - xs[:-1])[:, None]
    c1 = richardson(slopes, ratio, degree - 1)
    gen = infinitesimal_generator(phi, order or phi.order)
    g0 = BiSeries(gen.coeffs[0:1, :], gen.order)(0, y_points)
    g1 = BiSeries(gen.coeffs[1:2, :], gen.order)(0, y_points)
    return GeneratorComparison(y_points, c0, g0), GeneratorComparison(y_points, c1, g1)


# Cauchy-Heine transform

@dataclass
class RayDifference:
    """A sector boundary difference h_k - h_{k-1} on the ray from 0 to c*direction."""
    direction: complex
    function: Callable[[complex], complex]


def _ray_integrand(ray: RayDifference, n: int):
    lam = complex(ray.direction) / abs(ray.direction)

    def f(t):
        if t == 0:
            return 0j
        w = t * lam
        return complex(ray.function(w) * w ** (-(n + 1)) * lam)

    return f


def cauchy_heine(rays: Sequence[RayDifference], radius: float, n_max: int, tol: float = 1e-12,
                 limit: int = 200) -> np.ndarray:
    """h_n = (1/2 pi i) sum_k int_0^{c lambda_k} d_k(w) w^{-(n+1)} dw for n = 0..n_max."""
    out = np.zeros(n_max + 1, dtype=complex)
    for n in range(n_max + 1):
        total = 0j
        for ray in rays:
            f = _ray_integrand(ray, n)
            re, err_re = integrate.quad(lambda t: f(t).real, 0.0, radius, epsabs=tol, epsrel=tol, limit=limit)
            im, err_im = integrate.quad(lambda t: f(t).imag, 0.0, radius, epsabs=tol, epsrel=tol, limit=limit)
            err = math.hypot(err_re, err_im)
            if not np.isfinite(err) or err > 1e3 * tol * max(1.0, abs(complex(re, im))):
                raise QuadratureError('quadrature did not converge', {'n': n, 'error': err,
                                                                     'direction': complex(ray.direction)})
            total += complex(re, im)
        out[n] = total / (2j * math.pi)
    return out


def cauchy_heine_oracle(rays: Sequence[RayDifference], radius: float, n_max: int, pieces: int = 400,
                        nodes: int = 20) -> np.ndarray:
    """The same sums by composite Gauss-Legendre quadrature at fixed high resolution."""
    x, wts = legendre.leggauss(nodes)
    edges = np.linspace(0.0, radius, pieces + 1)
    out = np.zeros(n_max + 1, dtype=complex)
    for n in range(n_max + 1):
        total = 0j
        for ray in rays:
            f = _ray_integrand(ray, n)
            for a, b in zip(edges[:-1], edges[1:]):
                t = 0.5 * (b - a) * x + 0.5 * (b + a)
                total += 0.5 * (b - a) * sum(wi * f(ti) for wi, ti in zip(wts, t))
        out[n] = total / (2j * math.pi)
    return out
