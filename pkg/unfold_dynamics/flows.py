"""Real flows of complex vector fields.

States are complex numbers; the planar field is Re(Z(w) d/dw). Separatrix and
homoclinic computations use two charts of the Riemann sphere, w and z = 1/w,
with the positively rescaled field -mu * conj(z)^(n-2) * Q(z) near infinity.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import bisect

from .algebra import ComplexPoly, roots
from .errors import OrbitError, TangencyError

logger = logging.getLogger(__name__)

SINGULARITY = 'singularity'
LEFT_DOMAIN = 'left_domain'
ESCAPED = 'escaped'
STEP_LIMIT = 'step_limit'

HOMOCLINIC = 'homoclinic'
NONE = 'none'
INDETERMINATE = 'indeterminate'

STOP_FACTOR = 1e-6
DEFAULT_RTOL = 1e-9
DEFAULT_MAX_STEPS = 1_000_000
HOMOCLINIC_TOL = 1e-3

# Runge-Kutta-Fehlberg 4(5)
_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
)
_B4 = (25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0)
_B5 = (16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55)

Field = Callable[[complex], complex]


@dataclass
class Trajectory:
    times: np.ndarray
    points: np.ndarray
    termination: str
    limit: Optional[complex] = None
    residual: float = 0.0

    @property
    def start(self) -> complex:
        return complex(self.points[0])

    @property
    def end(self) -> complex:
        return complex(self.points[-1])

    def __len__(self):
        return len(self.points)


def rkf45_step(f: Field, w: complex, h: float) -> Tuple[complex, float]:
    """One Fehlberg step; returns the fifth-order state and the error estimate."""
    k = []
    for a in _A:
        inc = sum(c * kk for c, kk in zip(a, k))
        k.append(f(w + h * inc))
    y4 = w + h * sum(b * kk for b, kk in zip(_B4, k))
    y5 = w + h * sum(b * kk for b, kk in zip(_B5, k))
    return y5, abs(y5 - y4)


def _stop_radius(singularities: Sequence[complex]) -> float:
    s = list(singularities)
    if len(s) >= 2:
        d = min(abs(a - b) for i, a in enumerate(s) for b in s[i + 1:])
        if d > 0:
            return STOP_FACTOR * d
    return STOP_FACTOR


def integrate(f: Field, start: complex, singularities: Sequence[complex] = (),
              escape_radius: Optional[float] = None, inside: Optional[Callable[[complex], bool]] = None,
              rtol: float = DEFAULT_RTOL, max_steps: int = DEFAULT_MAX_STEPS, backward: bool = False,
              stop_radius: Optional[float] = None, max_time: Optional[float] = None,
              h0: Optional[float] = None, max_step: Optional[float] = None) -> Trajectory:
    """Adaptive RKF45 integration of Re(f) from start until a termination condition."""
    sing = np.asarray(list(singularities), dtype=complex)
    stop = _stop_radius(sing) if stop_radius is None else stop_radius
    w = complex(start)
    if sing.size and np.min(np.abs(sing - w)) <= stop:
        raise OrbitError('start point is a singular point', {'start': w})
    g = (lambda v: -f(v)) if backward else f
    v0 = g(w)
    if h0 is None:
        h0 = 1e-2 * (1.0 + abs(w)) / max(abs(v0), 1e-300)
    h = h0
    s = 0.0
    times, points = [0.0], [w]
    residual = 0.0
    termination, limit = STEP_LIMIT, None
    steps = 0
    while steps < max_steps:
        if max_step is not None and h > max_step:
            h = max_step
        if max_time is not None and s + h > max_time:
            h = max_time - s
        w_new, err = rkf45_step(g, w, h)
        tol = rtol * (1.0 + abs(w))
        if not np.isfinite(err):
            h *= 0.1
            continue
        if err <= tol:
            s += h
            w = w_new
            steps += 1
            times.append(s)
            points.append(w)
            residual = max(residual, err)
            if sing.size:
                d = np.abs(sing - w)
                i = int(np.argmin(d))
                if d[i] <= stop:
                    termination, limit = SINGULARITY, complex(sing[i])
                    break
            if escape_radius is not None and abs(w) >= escape_radius:
                termination = ESCAPED
                break
            if inside is not None and not inside(w):
                termination = LEFT_DOMAIN
                break
            if max_time is not None and s >= max_time:
                break
        factor = 4.0 if err == 0 else min(4.0, max(0.1, 0.84 * (tol / err) ** 0.25))
        h *= factor
        if h < 1e-15 * (1.0 + abs(s)):
            logger.warning('step size underflow at w=%s after %d steps', w, steps)
            break
    traj = Trajectory(np.asarray(times), np.asarray(points, dtype=complex), termination, limit, residual)
    logger.debug('integrate: %s after %d steps, end=%s', termination, steps, traj.end)
    return traj


# Separatrices and homoclinic trajectories

@dataclass
class Separatrix:
    index: int
    angle: float
    tag: str
    trajectory: Optional[Trajectory] = None


@dataclass
class SeparatrixFan:
    escape_radius: float
    directions: List[Separatrix]

    def angles(self, tag: Optional[str] = None) -> List[float]:
        return [d.angle for d in self.directions if tag is None or d.tag == tag]


@dataclass
class HomoclinicResult:
    outcome: str
    witness: Optional[Trajectory] = None
    details: dict = field(default_factory=dict)

    @property
    def found(self) -> bool:
        return self.outcome == HOMOCLINIC


class _Sphere:
    """mu*P on the w chart and its rescaled version on the z = 1/w chart."""

    def __init__(self, p: ComplexPoly, mu: complex, escape_radius: Optional[float] = None):
        if p.degree < 2:
            raise OrbitError('separatrices need degree >= 2', {'degree': p.degree})
        self.p = p
        self.mu = complex(mu)
        self.n = p.degree
        self.nu = p.degree - 1
        self.singular = [r for r, _ in roots(p)]
        scale = max((abs(r) for r in self.singular), default=0.0)
        self.R = escape_radius if escape_radius is not None else 10.0 * (1.0 + scale)
        self.q = ComplexPoly(p.coeffs[::-1], 'z')

    def w_field(self, w: complex) -> complex:
        return self.mu * self.p(w)

    def z_field(self, z: complex) -> complex:
        return -self.mu * np.conj(z) ** (self.n - 2) * self.q(z)

    def directions(self) -> List[Separatrix]:
        base = np.angle(self.mu * self.p.leading)
        out = []
        for d in range(2 * self.nu):
            angle = float(np.mod((d * math.pi - base) / self.nu, 2 * math.pi))
            out.append(Separatrix(d, angle, 'outbound' if d % 2 == 0 else 'inbound'))
        return out

    def seed(self, angle: float) -> complex:
        r0 = 0.0 if self.n == 2 else 1e-3 / self.R
        return r0 * np.exp(-1j * angle)

    def from_infinity(self, angle: float, backward: bool, rtol: float, max_steps: int) -> Trajectory:
        """Follow the separatrix with asymptotic angle from infinity into |w| <= R/2."""
        z0 = self.seed(angle)
        zleg = integrate(self.z_field, z0, escape_radius=2.0 / self.R, rtol=rtol,
                         max_steps=max_steps, backward=backward, stop_radius=0.0, h0=1e-3 / self.R)
        pts = [1.0 / z for z in zleg.points if z != 0]
        if zleg.termination != ESCAPED:
            return Trajectory(zleg.times, np.asarray(pts or [np.inf], dtype=complex), zleg.termination)
        wleg = integrate(self.w_field, 1.0 / zleg.end, self.singular, escape_radius=self.R,
                         rtol=rtol, max_steps=max_steps, backward=backward)
        return Trajectory(np.concatenate([zleg.times[-len(pts):], zleg.times[-1] + wleg.times[1:]]),
                          np.concatenate([np.asarray(pts, dtype=complex), wleg.points[1:]]),
                          wleg.termination, wleg.limit, max(zleg.residual, wleg.residual))


def separatrices(p: ComplexPoly, mu: complex, escape_radius: Optional[float] = None,
                 rtol: float = DEFAULT_RTOL, max_steps: int = 20_000) -> SeparatrixFan:
    sphere = _Sphere(p, mu, escape_radius)
    dirs = sphere.directions()
    for d in dirs:
        d.trajectory = sphere.from_infinity(d.angle, backward=(d.tag == 'outbound'), rtol=rtol, max_steps=max_steps)
    return SeparatrixFan(sphere.R, dirs)


def _angle_gap(a: float, b: float) -> float:
    return abs(math.remainder(a - b, 2 * math.pi))


def _closest_approach(points: np.ndarray) -> Tuple[float, int]:
    """Distance from 0 to the polygon through points, with the index of the closest edge."""
    a, b = points[:-1], points[1:]
    d = b - a
    length2 = np.abs(d) ** 2
    s = np.where(length2 > 0, (-a * np.conj(d)).real / np.where(length2 > 0, length2, 1.0), 0.0)
    dist = np.abs(a + np.clip(s, 0.0, 1.0) * d)
    i = int(np.argmin(dist))
    return float(dist[i]), i


def _witness(segments: List[Trajectory], zleg: Trajectory) -> Trajectory:
    keep = zleg.points != 0
    last = Trajectory(zleg.times[keep], 1.0 / zleg.points[keep], SINGULARITY)
    parts = segments + [last]
    return Trajectory(np.concatenate([s.times for s in parts]), np.concatenate([s.points for s in parts]), ESCAPED)


def detect_homoclinic(p: ComplexPoly, mu: complex, escape_radius: Optional[float] = None,
                      tol: float = HOMOCLINIC_TOL, rtol: float = DEFAULT_RTOL,
                      max_steps: int = 20_000, max_passes: int = 4) -> HomoclinicResult:
    """Search for a trajectory from infinity back to infinity along the inbound separatrices.

    For degree 2 the point at infinity is a regular point of the z-chart
    field: a homoclinic leg passes through z = 0, detected by the closest
    approach of the z-leg polygon. Higher degrees stop at z = 0 and compare
    the arrival angle with the outbound directions.
    """
    sphere = _Sphere(p, mu, escape_radius)
    dirs = sphere.directions()
    outbound = [d.angle for d in dirs if d.tag == 'outbound']
    regular = sphere.n == 2
    max_step = 0.02 * (2.0 / sphere.R) / abs(sphere.mu * p.leading) if regular else None
    undecided = []
    for d in dirs:
        if d.tag != 'inbound':
            continue
        traj = sphere.from_infinity(d.angle, backward=False, rtol=rtol, max_steps=max_steps)
        segments = [traj]
        outcome = None
        for _ in range(max_passes):
            if traj.termination == SINGULARITY:
                outcome = NONE
                break
            if traj.termination != ESCAPED:
                outcome = INDETERMINATE
                break
            if regular:
                zleg = integrate(sphere.z_field, 1.0 / traj.end, escape_radius=2.0 / sphere.R, rtol=rtol,
                                 max_steps=max_steps, max_step=max_step)
                miss, _ = _closest_approach(zleg.points)
                if miss * sphere.R < tol:
                    logger.debug('homoclinic found from direction %d, closest approach %.2e', d.index, miss)
                    return HomoclinicResult(HOMOCLINIC, _witness(segments, zleg),
                                            {'inbound': d.index, 'closest_approach': miss * sphere.R})
            else:
                zleg = integrate(sphere.z_field, 1.0 / traj.end, [0j], escape_radius=2.0 / sphere.R, rtol=rtol,
                                 max_steps=max_steps, stop_radius=STOP_FACTOR / sphere.R)
                if zleg.termination == SINGULARITY:
                    z_end = zleg.points[-1]
                    angle = float(np.mod(-np.angle(z_end), 2 * math.pi))
                    gap = min(_angle_gap(angle, a) for a in outbound)
                    if gap < tol:
                        logger.debug('homoclinic found from direction %d, gap %.2e', d.index, gap)
                        return HomoclinicResult(HOMOCLINIC, _witness(segments, zleg),
                                                {'inbound': d.index, 'angle_gap': gap})
                    outcome = INDETERMINATE
                    break
            if zleg.termination != ESCAPED:
                outcome = INDETERMINATE
                break
            traj = integrate(sphere.w_field, 1.0 / zleg.end, sphere.singular, escape_radius=sphere.R,
                             rtol=rtol, max_steps=max_steps)
            segments.append(traj)
        if outcome is None or outcome == INDETERMINATE:
            undecided.append(d.index)
    if undecided:
        logger.warning('homoclinic search indeterminate for inbound directions %s', undecided)
        return HomoclinicResult(INDETERMINATE, None, {'undecided': undecided})
    return HomoclinicResult(NONE)


def stability_sweep(p: ComplexPoly, n_mu: int = 16, **kwargs) -> List[Tuple[float, bool, str]]:
    """(arg mu, membership in the stable class, homoclinic outcome) over equispaced mu."""
    from .directions import in_x_infinity
    rows = []
    for m in range(n_mu):
        angle = 2 * math.pi * m / n_mu
        mu = complex(np.exp(1j * angle))
        stable = in_x_infinity(p.scale(mu))
        rows.append((angle, stable, detect_homoclinic(p, mu, **kwargs).outcome))
    return rows


@dataclass
class Portrait:
    poly: ComplexPoly
    mu: complex
    fan: SeparatrixFan
    trajectories: List[Tuple[str, Trajectory]]
    singular: List[complex] = field(default_factory=list)


def portrait(p: ComplexPoly, mu: complex, grid: int = 6, max_steps: int = 4000,
             rtol: float = 1e-8) -> Portrait:
    fan = separatrices(p, mu, rtol=rtol, max_steps=max_steps)
    sphere = _Sphere(p, mu, fan.escape_radius)
    half = fan.escape_radius / 2
    trajectories = []
    for d in fan.directions:
        trajectories.append((f"separatrix_{d.index}_{d.tag}", d.trajectory))
    ticks = np.linspace(-half, half, grid)
    for a in ticks:
        for b in ticks:
            w0 = complex(a, b)
            if min((abs(w0 - s) for s in sphere.singular), default=1.0) < 1e-3 * fan.escape_radius:
                continue
            for backward in (False, True):
                t = integrate(sphere.w_field, w0, sphere.singular, escape_radius=fan.escape_radius,
                              rtol=rtol, max_steps=max_steps, backward=backward)
                trajectories.append((f"seed_{a:.3g}_{b:.3g}_{'b' if backward else 'f'}", t))
    return Portrait(p, complex(mu), fan, trajectories, list(sphere.singular))


# Circle tangencies

@dataclass
class TangentPoint:
    angle: float
    point: complex
    convex: bool


@dataclass
class TangencySet:
    radius: float
    centre: complex
    points: List[TangentPoint]

    def __len__(self):
        return len(self.points)

    @property
    def all_convex(self) -> bool:
        return all(p.convex for p in self.points)

    def angles(self) -> List[float]:
        return [p.angle for p in self.points]


def circle_tangencies(f: Field, radius: float, centre: complex = 0j, samples: int = 720) -> TangencySet:
    """Points of |w - centre| = radius where the trajectory of Re(f) is tangent to the circle."""
    def g(alpha: float) -> float:
        e = np.exp(1j * alpha)
        return float((f(centre + radius * e) * np.conj(e)).real)

    alphas = np.linspace(0.0, 2 * math.pi, samples, endpoint=False)
    values = np.array([g(a) for a in alphas])
    scale = float(np.max(np.abs(values)))
    if scale <= 1e-300 or not np.isfinite(scale):
        raise TangencyError('tangency function vanishes on the circle', {'radius': radius, 'scale': scale})
    found = []
    for i in range(samples):
        a0, a1 = alphas[i], alphas[i] + 2 * math.pi / samples
        v0, v1 = values[i], values[(i + 1) % samples]
        if v0 == 0:
            found.append(float(a0))
        elif v0 * v1 < 0:
            found.append(float(bisect(g, a0, a1, xtol=1e-14)))
    h = 1e-6 * radius
    points = []
    for a in found:
        p = centre + radius * np.exp(1j * a)
        z = f(p)
        dz = (f(p + h) - f(p - h)) / (2 * h)
        second = 2 * abs(z) ** 2 + 2 * (dz * z * np.conj(p - centre)).real
        points.append(TangentPoint(float(np.mod(a, 2 * math.pi)), complex(p), bool(second < 0)))
    points.sort(key=lambda t: t.angle)
    return TangencySet(radius, complex(centre), points)


def node_tangencies(node, mu: complex, x: complex, radius: Optional[float] = None, centre: complex = 0j,
                    samples: int = 720) -> TangencySet:
    """Tangencies of Re(mu * X) on a circle of a basic set, in its adapted coordinate."""
    from .splitting import COMPACT_LIKE
    lam = complex(x) / abs(x) if x != 0 else 1.0 + 0j
    if radius is None:
        radius = node.radii.rho if node.kind == COMPACT_LIKE else node.radii.eta
    fld = node.field

    def f(t):
        return complex(mu * fld.reduced(lam, x, t))

    return circle_tangencies(f, radius, centre, samples)


# Region classification

@dataclass
class RegionLabel:
    alpha: str
    omega: str


def _label(traj: Trajectory, curve_values: Sequence[complex]) -> str:
    if traj.termination == SINGULARITY:
        d = [abs(traj.limit - c) for c in curve_values]
        return f"gamma_{int(np.argmin(d))}"
    if traj.termination in (LEFT_DOMAIN, ESCAPED):
        return 'exterior'
    return INDETERMINATE


def classify_point(aleph, tree, point: Tuple[complex, complex], rtol: float = 1e-8,
                   max_steps: int = 20_000) -> RegionLabel:
    """(alpha, omega) limits of the trajectory of Re(aleph* X) through the point, in its fiber."""
    from .directions import aleph_star
    x, y0 = complex(point[0]), complex(point[1])
    X = tree.root.field
    eps = tree.radii.epsilon
    curve_values = [v for v, _ in X.curves.values(x)]
    distinct = []
    for v in curve_values:
        if all(abs(v - d) > 1e-14 for d in distinct):
            distinct.append(v)
    stop = _stop_radius(distinct) if len(distinct) > 1 else STOP_FACTOR * eps
    if min(abs(y0 - v) for v in distinct) <= stop:
        raise OrbitError('point lies on the singular set', {'x': x, 'y': y0})

    def f(y):
        if abs(y) > eps:
            return complex(1j * X(x, y))
        return complex(aleph_star(aleph, tree, (x, y)) * X(x, y))

    def inside(y):
        return abs(y) < eps

    fwd = integrate(f, y0, distinct, inside=inside, rtol=rtol, max_steps=max_steps, stop_radius=stop)
    bwd = integrate(f, y0, distinct, inside=inside, rtol=rtol, max_steps=max_steps, backward=True, stop_radius=stop)
    return RegionLabel(_label(bwd, curve_values), _label(fwd, curve_values))
