"""Normal forms and Fatou coordinates of unfoldings.

A Fatou coordinate of phi on a petal is obtained from the closed-form
coordinate psi_n of a k-convergent normal form X_k by summing the defect
Delta = psi_n o phi - psi_n - 1 along the orbit towards the attracting end
(forward orbits) or the repelling end (backward orbits).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .algebra import DEFAULT_ORDER, BiSeries, lie_exp
from .errors import OrbitError, SeriesError
from .flows import circle_tangencies
from .maps import AnalyticMap, TimeForm, UnfoldingMap
from .splitting import VectorFieldUnfolding

logger = logging.getLogger(__name__)

DEFAULT_K = 6
DEFAULT_BUDGET = 20000
DEFAULT_THETA = math.pi / 2
ROUNDOFF = 2e-14
ARC_PIECES = 128
RADIAL_PIECES = 64


# Normal forms

def infinitesimal_generator(phi: AnalyticMap, order: int = DEFAULT_ORDER, tol: float = 1e-10) -> BiSeries:
    """The formal field G d/dy with exp(G d/dy)(y) = y o phi modulo total degree `order`.

    Solved one total degree at a time: the degree-d part of G is the
    degree-d part of y o phi - exp(G_{<d} d/dy)(y), since G vanishes to
    order 2 and cannot feed back into its own degree.
    """
    target = phi.series(order)
    y = BiSeries.y(order)
    if (target - y).low_order() is not None and (target - y).low_order() < 2:
        raise SeriesError('map is not tangent to the identity at the origin', {'low_order': (target - y).low_order()})
    i, j = np.indices((order + 1, order + 1))
    total = i + j
    coeffs = np.zeros((order + 1, order + 1), dtype=complex)
    for d in range(2, order + 1):
        partial = lie_exp(BiSeries(coeffs[:d + 1, :d + 1], d))
        gap = target.truncate(d) - partial
        layer = total[:d + 1, :d + 1] == d
        coeffs[:d + 1, :d + 1][layer] = gap.coeffs[layer]
    g = BiSeries(coeffs, order)
    residual = float(np.max(np.abs((target - lie_exp(g)).coeffs)))
    scale = max(1.0, float(np.max(np.abs(target.coeffs))))
    logger.debug('infinitesimal generator: order %d, residual %.3e', order, residual)
    if residual > tol * scale:
        raise SeriesError('infinitesimal generator residual above tolerance', {'residual': residual, 'order': order})
    return g


def required_order(total_multiplicity: int, k: int) -> int:
    return total_multiplicity * (k + 1) - 1


def normal_form_order(nu: int, k: Optional[int] = None) -> int:
    """Explicit k as given; otherwise max(DEFAULT_K, 4 nu), enough for the orbit-sum tail."""
    return max(DEFAULT_K, 4 * nu) if k is None else int(k)


def k_normal_form(phi: AnalyticMap, k: Optional[int] = None, order: Optional[int] = None) -> VectorFieldUnfolding:
    """X_k = u_k * F d/dy with y o phi - y o exp(X_k) in the ideal (F^{k+1})."""
    k = normal_form_order(phi.curves.nu, k)
    if k < 1:
        raise SeriesError('normal form order must be positive', {'k': k})
    if isinstance(phi, UnfoldingMap) and phi.is_flow:
        return phi.normal_field
    m = phi.curves.total
    order = max(phi.order, required_order(m, k)) if order is None else order
    if order < required_order(m, k):
        raise SeriesError('truncation order too small for the requested normal form',
                          {'order': order, 'required': required_order(m, k), 'k': k})
    g = infinitesimal_generator(phi, order)
    f = phi.curves.product_series(order)
    quotient, remainder = g.divmod_y(f)
    if float(np.max(np.abs(remainder.coeffs))) > 1e-8 * max(1.0, float(np.max(np.abs(g.coeffs)))):
        raise SeriesError('generator does not vanish on the fixed curves',
                          {'remainder': float(np.max(np.abs(remainder.coeffs)))})
    _, unit = quotient.divmod_y(f ** k)
    unit = unit.chop()
    logger.debug('k-normal form: k=%d order=%d unit terms=%d', k, order, len(unit.terms()))
    return VectorFieldUnfolding(unit, phi.curves)


def delta(phi: AnalyticMap, form: TimeForm, y):
    """psi_n(phi(P)) - psi_n(P) - 1 along the segment from P to phi(P)."""
    return form.increment(y, phi(form.x, y)) - 1.0


# Petals

@dataclass
class PetalIndex:
    j: int
    s: int
    angle: float
    anchor: complex

    @property
    def attracting(self) -> bool:
        return self.s == 1


def _anchor_angles(field_: VectorFieldUnfolding) -> List[tuple]:
    nu = field_.nu
    base = np.angle(field_.v00)
    out = []
    for m in range(2 * nu):
        alpha = float(np.mod((m * math.pi - base) / nu, 2 * math.pi))
        s = 1 if (field_.v00 * np.exp(1j * nu * alpha)).real < 0 else -1
        out.append((alpha, s))
    return sorted(out)


def petal_anchors(field_: VectorFieldUnfolding, x: complex, epsilon: float) -> List[PetalIndex]:
    """Tangent points of Re(iX) on |y| = epsilon, indexed and oriented from the x = 0 configuration."""
    if field_.nu < 1:
        raise OrbitError('petals need total multiplicity >= 2', {'nu': field_.nu})
    base = _anchor_angles(field_)
    if x == 0:
        return [PetalIndex(j, s, a, complex(epsilon * np.exp(1j * a))) for j, (a, s) in enumerate(base)]
    form_x = complex(x)

    def iX(t):
        return complex(1j * field_(form_x, t))

    found = circle_tangencies(iX, epsilon).angles()
    if len(found) != len(base):
        raise OrbitError('petal anchors lost in continuation', {'x': form_x, 'found': len(found), 'expected': len(base)})
    petals = []
    for j, (a, s) in enumerate(base):
        best = min(found, key=lambda b: abs(math.remainder(b - a, 2 * math.pi)))
        petals.append(PetalIndex(j, s, best, complex(epsilon * np.exp(1j * best))))
    return petals


@dataclass
class SectorRegion:
    """W = {Re z > 0} union {|Im z| + tan(theta) Re z > M}."""
    theta: float
    M: float = 0.0

    def contains(self, z):
        z = np.asarray(z, dtype=complex)
        return (z.real > 0) | (np.abs(z.imag) + math.tan(self.theta) * z.real - self.M > 0)

    def absorbs(self, psi_orbit: Sequence[complex], deltas: Sequence[complex]) -> Optional[bool]:
        """Whether a forward psi-orbit stays in W; None when the absorption hypothesis fails."""
        psi_orbit = np.asarray(psi_orbit, dtype=complex)
        if not bool(self.contains(psi_orbit[0])):
            return None
        if np.any(np.abs(np.asarray(deltas)) > math.sin(self.theta) / 2):
            return None
        return bool(np.all(self.contains(psi_orbit)))


def petal_points(petal: PetalIndex, epsilon: float, nu: int, count: int) -> np.ndarray:
    """count points on a segment across the petal axis, radii 0.25 to 0.6 epsilon."""
    u = np.linspace(0.0, 1.0, count) if count > 1 else np.array([0.5])
    radii = epsilon * (0.25 + 0.35 * u)
    angles = petal.angle + (math.pi / (8 * nu)) * (2 * u - 1)
    return radii * np.exp(1j * angles)


# Fatou coordinates

class NormalFatou:
    """psi_n of a normal form on one petal, zero at the petal anchor."""

    def __init__(self, form: TimeForm, petal: PetalIndex, epsilon: float):
        self.form = form
        self.petal = petal
        self.epsilon = epsilon

    def path(self, y: complex) -> np.ndarray:
        a0 = self.petal.angle
        rel = math.remainder(np.angle(y) - a0, 2 * math.pi)
        arc = self.epsilon * np.exp(1j * (a0 + rel * np.linspace(0.0, 1.0, ARC_PIECES + 1)))
        r = abs(y)
        if r == 0:
            raise OrbitError('normal Fatou coordinate undefined at the origin', {'y': y})
        radii = self.epsilon * (r / self.epsilon) ** np.linspace(0.0, 1.0, RADIAL_PIECES + 1)
        radial = radii * np.exp(1j * np.angle(y))
        return np.concatenate([arc, radial[1:]])

    def __call__(self, y):
        y = np.asarray(y, dtype=complex)
        out = np.array([self.form.continue_along(self.path(v)) for v in np.atleast_1d(y)])
        return out.reshape(y.shape) if y.ndim else complex(out[0])


def tail_constant(theta: float = DEFAULT_THETA) -> float:
    """c with |psi_n| >= c |n| along orbits in a sector region of opening theta."""
    return math.sqrt((1.0 - math.cos(theta)) / 2.0)


def tail_bound(k: int, K, psi, c: Optional[float] = None):
    """Bound on the remaining sum of |Delta| once |Delta| <= K/(1+|psi|)^k along the orbit."""
    c = tail_constant() if c is None else c
    return (4.0 ** k * math.sqrt(2) ** k / c ** k) * np.asarray(K) * k / ((k - 1) * (1.0 + np.abs(psi)) ** (k - 1))


def roundoff_floor(psi):
    """Per-step rounding level of Delta, which carries no decay information."""
    return ROUNDOFF * (1.0 + np.abs(psi))


@dataclass
class FatouValue:
    y: np.ndarray
    psi: np.ndarray
    residual: np.ndarray
    steps: np.ndarray
    normal: np.ndarray = field(default=None)
    correction: np.ndarray = field(default=None)


class FatouEvaluator:
    """Orbit-summation Fatou coordinate of phi on one petal of the fiber over x."""

    def __init__(self, phi: AnalyticMap, petal_j: int, x: complex, epsilon: float = 0.5, k: Optional[int] = None,
                 budget: int = DEFAULT_BUDGET, tol: float = 1e-12, theta: float = DEFAULT_THETA,
                 normal_field: Optional[VectorFieldUnfolding] = None):
        self.logger = logging.getLogger(__name__)
        self.phi = phi
        self.x = complex(x)
        self.epsilon = epsilon
        self.k = max(normal_form_order(phi.curves.nu, k), 2)
        self.budget = budget
        self.tol = tol
        self.theta = theta
        self.tail_c = tail_constant(theta)
        self.normal_field = normal_field if normal_field is not None else k_normal_form(phi, self.k)
        self.form = TimeForm(self.normal_field, self.x)
        petals = petal_anchors(self.normal_field, self.x, epsilon)
        self.petal = petals[petal_j % len(petals)]
        self.normal = NormalFatou(self.form, self.petal, epsilon)
        self._anchor_correction = None

    def _step(self, q):
        return self.phi(self.x, q) if self.petal.attracting else self.phi.inverse(self.x, q)

    def orbit_sums(self, y) -> tuple:
        """Per point: (correction C, residual, steps) with psi = psi_n + C up to the anchor constant."""
        q = np.atleast_1d(np.asarray(y, dtype=complex)).copy()
        psi = np.asarray(self.normal(q), dtype=complex).reshape(q.shape)
        total = np.zeros(q.shape, dtype=complex)
        K = np.zeros(q.shape)
        noise = np.zeros(q.shape)
        tail = np.full(q.shape, np.inf)
        steps = np.zeros(q.shape, dtype=int)
        active = np.ones(q.shape, dtype=bool)
        s = self.petal.s
        for i in range(self.budget):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            cur = q[idx]
            nxt = self._step(cur)
            if np.any(np.abs(nxt) > self.epsilon):
                bad = idx[np.abs(nxt) > self.epsilon][0]
                raise OrbitError('orbit left the petal region', {'x': self.x, 'start': complex(np.atleast_1d(y)[bad]),
                                                                 'escape': complex(nxt[np.abs(nxt) > self.epsilon][0]),
                                                                 'step': i + 1})
            if s == 1:
                d = self.form.increment(cur, nxt) - 1.0
                total[idx] += d
                psi_next = psi[idx] + 1.0 + d
            else:
                d = self.form.increment(nxt, cur) - 1.0
                total[idx] -= d
                psi_next = psi[idx] - 1.0 - d
            size = np.minimum(np.abs(psi[idx]), np.abs(psi_next))
            floor = roundoff_floor(size)
            K[idx] = np.maximum(K[idx], np.maximum(np.abs(d) - floor, 0.0) * (1.0 + size) ** self.k)
            noise[idx] += floor
            q[idx] = nxt
            psi[idx] = psi_next
            steps[idx] += 1
            tail[idx] = tail_bound(self.k, K[idx], psi_next, self.tail_c)
            done = (tail[idx] <= self.tol) & (steps[idx] >= 2)
            active[idx[done]] = False
        if np.any(active):
            raise OrbitError('orbit budget exhausted before the tail bound met the tolerance',
                             {'x': self.x, 'budget': self.budget, 'residual': float(np.max(tail[active]))})
        # rounding accumulates over the summed steps on top of the truncated tail
        return total, tail + noise, steps

    def anchor_correction(self) -> tuple:
        if self._anchor_correction is None:
            c, r, _ = self.orbit_sums(self.petal.anchor)
            self._anchor_correction = (complex(c[0]), float(r[0]))
        return self._anchor_correction

    def evaluate(self, y) -> FatouValue:
        y = np.atleast_1d(np.asarray(y, dtype=complex))
        if np.any(np.abs(y) > self.epsilon):
            raise OrbitError('point outside the petal disk', {'epsilon': self.epsilon})
        normal = np.asarray(self.normal(y)).reshape(y.shape)
        correction, residual, steps = self.orbit_sums(y)
        c0, r0 = self.anchor_correction()
        psi = normal + correction - c0
        self.logger.debug('fatou: %d points, max residual %.3e', y.size, float(np.max(residual)))
        return FatouValue(y, psi, residual + r0, steps, normal, correction - c0)

    def __call__(self, y):
        y = np.asarray(y, dtype=complex)
        value = self.evaluate(y).psi
        return value.reshape(y.shape) if y.ndim else complex(value[0])

    def abel_residual(self, y):
        """|psi(phi(P)) - psi(P) - 1| on points whose image stays in the disk."""
        y = np.atleast_1d(np.asarray(y, dtype=complex))
        image = self.phi(self.x, y)
        return np.abs(self(image) - self(y) - 1.0)


def fatou_orbit(phi: AnalyticMap, petal_j: int, x: complex, y: complex, budget: int = DEFAULT_BUDGET,
                epsilon: float = 0.5, **kwargs) -> Tuple[complex, float]:
    """psi_j at a single point with its residual bound."""
    value = FatouEvaluator(phi, petal_j, x, epsilon=epsilon, budget=budget, **kwargs).evaluate(y)
    return complex(value.psi[0]), float(value.residual[0])


@dataclass
class LavaursSample:
    y: np.ndarray
    g: np.ndarray
    error: np.ndarray


def lavaurs_sample(evaluator: FatouEvaluator, y, h: float = 1e-4) -> LavaursSample:
    """1/(d psi/dy) by central differences, with a Richardson error estimate."""
    y = np.atleast_1d(np.asarray(y, dtype=complex))
    if np.any(np.abs(y) + 2 * h > evaluator.epsilon):
        raise OrbitError('difference step leaves the petal disk', {'h': h, 'epsilon': evaluator.epsilon})
    pts = np.concatenate([y + h, y - h, y + 2 * h, y - 2 * h])
    v = evaluator.evaluate(pts)
    n = y.size
    p1, m1, p2, m2 = (v.psi[i * n:(i + 1) * n] for i in range(4))
    r = v.residual
    g1 = 2 * h / (p1 - m1)
    g2 = 4 * h / (p2 - m2)
    fd = np.abs(g1 - g2) / 3.0
    orbit = np.abs(g1) ** 2 * (r[:n] + r[n:2 * n]) / (2 * h)
    return LavaursSample(y, g1, fd + orbit)
