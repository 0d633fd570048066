"""Realizations of unfolding maps phi(x, y) = (x, f(x, y)).

Every map works fiberwise: x is a scalar, y a scalar or an array. The time
form dt/X of a polynomial field is integrated in closed form from its
partial fractions, which gives both the flow map exp(tau X) and the
normal-form Fatou coordinate.
"""
import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import legendre

from .algebra import (ALGEBRAIC_TOL, DEFAULT_ORDER, BiSeries, ComplexPoly, FixedCurveSet, PartialFraction,
                      lie_exp, partial_fractions, roots, series_inverse_y)
from .errors import OrbitError, SeriesError
from .splitting import VectorFieldUnfolding

logger = logging.getLogger(__name__)

INVERSE_TOL = 1e-13
FLOW_TOL = 1e-14
UNIT_TRIM = 1e-13
QUADRATURE_NODES = 16
QUADRATURE_RATIO = 0.5
BRANCH_GUARD = math.pi / 2
SINGULAR_TOL = 1e-14
MAX_HALVINGS = 12
STALL_LIMIT = 3

_GL_NODES, _GL_WEIGHTS = legendre.leggauss(QUADRATURE_NODES)


def _segment_foot(p, q, r: complex) -> Tuple[np.ndarray, np.ndarray]:
    """Distance from r to the segment [p, q] and the nearest point on it."""
    p = np.asarray(p, dtype=complex)
    d = np.asarray(q, dtype=complex) - p
    length2 = np.abs(d) ** 2
    with np.errstate(divide='ignore', invalid='ignore'):
        s = np.where(length2 > 0, ((r - p) * np.conj(d)).real / np.where(length2 > 0, length2, 1.0), 0.0)
    point = p + np.clip(s, 0.0, 1.0) * d
    return np.abs(point - r), point


def _merge_roots(points: Sequence[Tuple[complex, int]], tol: float = 1e-15) -> List[Tuple[complex, int]]:
    merged: List[List] = []
    for r, m in points:
        for entry in merged:
            if abs(entry[0] - r) <= tol * (1.0 + abs(r)):
                entry[1] += m
                break
        else:
            merged.append([complex(r), int(m)])
    return [(r, m) for r, m in merged]


class TimeForm:
    """Closed-form primitive of dt/X(x, t) on the fiber over x."""

    def __init__(self, field: VectorFieldUnfolding, x: complex, tol: float = ALGEBRAIC_TOL):
        self.logger = logging.getLogger(__name__)
        self.field = field
        self.x = complex(x)
        scale = self.x ** field.x_exponent
        if scale == 0:
            raise OrbitError('field vanishes identically on the fiber', {'x': self.x})
        unit = field.unit.at_x(self.x, 't')
        c = np.array(unit.coeffs)
        keep = np.flatnonzero(np.abs(c) > UNIT_TRIM * np.max(np.abs(c)))
        unit = ComplexPoly(c[:keep[-1] + 1], 't')
        known = list(field.curves.values(self.x))
        if unit.degree > 0:
            known += roots(unit, tol)
        self.singular = _merge_roots(known)
        curve_poly = ComplexPoly.from_roots(field.curves.values(self.x), var='t')
        self.poly = (unit * curve_poly).scale(scale)
        self.lead = self.poly.leading
        self.dpoly = self.poly.derivative()
        self.terms: List[PartialFraction] = partial_fractions(self.poly, tol, self.singular)
        self._log = [t for t in self.terms if t.order == 1]
        self._pole = [t for t in self.terms if t.order > 1]
        self.logger.debug('time form at x=%s: %d singular points, %d terms', self.x, len(self.singular), len(self.terms))

    @property
    def curve_points(self) -> List[complex]:
        return [v for v, _ in self.field.curves.values(self.x)]

    def residues(self) -> Dict[complex, complex]:
        return {t.root: t.coeff for t in self._log}

    def residue_sum(self) -> complex:
        """Sum of residues over the fixed-curve points; the unit's zeros lie outside the domain."""
        points = self.curve_points
        return complex(sum(t.coeff for t in self._log
                           if min(abs(t.root - p) for p in points) <= 1e-15 * (1.0 + abs(t.root))))

    def vector(self, t):
        """X on the fiber, evaluated from the factored form."""
        t = np.asarray(t, dtype=complex)
        out = np.full(t.shape, self.lead, dtype=complex)
        for r, m in self.singular:
            out = out * (t - r) ** m
        return out

    def rational_part(self, t):
        t = np.asarray(t, dtype=complex)
        out = np.zeros_like(t)
        for term in self._pole:
            out = out + term.coeff / ((1 - term.order) * (t - term.root) ** (term.order - 1))
        return out

    def clearance(self, p, q) -> np.ndarray:
        """Distance from each segment [p, q] to the nearest singular point."""
        best = np.full(np.shape(p), np.inf)
        for r, _ in self.singular:
            best = np.minimum(best, _segment_foot(p, q, r)[0])
        return best

    def increment(self, p, q):
        """Integral of dt/X along the straight segment from p to q.

        Segments short against their clearance use Gauss-Legendre on 1/X,
        which keeps relative accuracy where large residues cancel; longer
        ones use the closed form with branch re-anchoring.
        """
        p, q = np.broadcast_arrays(np.asarray(p, dtype=complex), np.asarray(q, dtype=complex))
        shape = p.shape
        p, q = p.ravel(), q.ravel()
        out = np.zeros(p.shape, dtype=complex)
        short = np.abs(q - p) <= QUADRATURE_RATIO * self.clearance(p, q)
        if np.any(short):
            out[short] = self._quadrature(p[short], q[short])
        if np.any(~short):
            out[~short] = self._closed_form(p[~short], q[~short])
        return out.reshape(shape)

    def _quadrature(self, p: np.ndarray, q: np.ndarray) -> np.ndarray:
        half = 0.5 * (q - p)
        nodes = 0.5 * (q + p)[:, None] + half[:, None] * _GL_NODES[None, :]
        return half * np.sum(_GL_WEIGHTS[None, :] / self.vector(nodes), axis=1)

    def _closed_form(self, p: np.ndarray, q: np.ndarray, depth: int = 0) -> np.ndarray:
        worst = np.zeros(p.shape)
        foot = p.copy()
        for r, _ in self.singular:
            dist, point = _segment_foot(p, q, r)
            if np.any(dist <= SINGULAR_TOL * (1.0 + abs(r))):
                hit = int(np.flatnonzero(dist <= SINGULAR_TOL * (1.0 + abs(r)))[0])
                raise OrbitError('path crosses a singular point',
                                 {'x': self.x, 'singular': complex(r), 'from': complex(p[hit]), 'to': complex(q[hit])})
            turn = np.abs(np.angle((q - r) / (p - r)))
            replace = turn > worst
            worst = np.where(replace, turn, worst)
            foot = np.where(replace, point, foot)
        risky = worst > BRANCH_GUARD
        out = np.empty(p.shape, dtype=complex)
        safe = ~risky
        if np.any(safe):
            ps, qs = p[safe], q[safe]
            value = self.rational_part(qs) - self.rational_part(ps)
            for term in self._log:
                value = value + term.coeff * np.log((qs - term.root) / (ps - term.root))
            out[safe] = value
        if np.any(risky):
            # split at the foot of the perpendicular from the worst singular point
            if depth >= 2 * len(self.singular) + 2:
                raise OrbitError('branch re-anchoring did not terminate', {'x': self.x, 'depth': depth})
            m = foot[risky]
            out[risky] = self._closed_form(p[risky], m, depth + 1) + self._closed_form(m, q[risky], depth + 1)
        return out

    def continue_along(self, path) -> complex:
        path = np.asarray(path, dtype=complex)
        return complex(np.sum(self.increment(path[:-1], path[1:])))

    def _newton(self, p: np.ndarray, tau: complex, tol: float, max_iter: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Solve increment(p, q) = tau; returns q, a convergence mask and the last residuals."""
        v = self.vector(p)
        q = p + tau * v + 0.5 * tau ** 2 * v * self.dpoly(p)
        q = np.where(np.isfinite(q), q, p + tau * v)
        ok = ~(np.abs(v) > 0)
        q[ok] = p[ok]
        err = np.zeros(p.shape)
        best = np.full(p.shape, np.inf)
        stalls = np.zeros(p.shape, dtype=int)
        limit = tol * (1.0 + abs(tau))
        for _ in range(max_iter):
            active = np.flatnonzero(~ok & (stalls < STALL_LIMIT))
            if active.size == 0:
                break
            with np.errstate(divide='ignore', invalid='ignore', over='ignore'):
                r = self.increment(p[active], q[active]) - tau
            e = np.where(np.isfinite(r), np.abs(r), np.inf)
            err[active] = e
            ok[active] = e <= limit
            stalls[active] = np.where(e < best[active], 0, stalls[active] + 1)
            best[active] = np.minimum(best[active], e)
            move = active[(e > limit) & np.isfinite(e)]
            if move.size:
                q[move] = q[move] - r[(e > limit) & np.isfinite(e)] * self.vector(q[move])
        return q, ok, err

    def _advance(self, p: np.ndarray, tau: complex, tol: float, max_iter: int, depth: int = 0) -> np.ndarray:
        q, ok, err = self._newton(p, tau, tol, max_iter)
        if np.all(ok):
            return q
        if depth >= MAX_HALVINGS:
            raise OrbitError('flow map Newton iteration did not converge',
                             {'x': self.x, 'tau': tau, 'residual': float(np.max(err[~ok]))})
        bad = ~ok
        half = self._advance(p[bad], tau / 2, tol, max_iter, depth + 1)
        q[bad] = self._advance(half, tau / 2, tol, max_iter, depth + 1)
        return q

    def flow(self, y, tau: complex = 1.0, tol: float = FLOW_TOL, max_iter: int = 40):
        """exp(tau X)(y), split into substeps short compared with the local linear rate.

        Points whose Newton solve stalls are redone in two half steps.
        """
        y = np.asarray(y, dtype=complex)
        p = np.atleast_1d(y).ravel().copy()
        rate = float(np.max(np.abs(self.dpoly(p)))) if p.size else 0.0
        steps = int(min(1000, max(1, np.ceil(4.0 * abs(tau) * rate))))
        for _ in range(steps):
            p = self._advance(p, tau / steps, tol, max_iter)
        return p.reshape(y.shape) if y.ndim else complex(p[0])


class AnalyticMap:
    """Common interface: series, evaluation, inverse and y-derivative on a fiber."""

    curves: FixedCurveSet

    def __init__(self, order: int = DEFAULT_ORDER):
        self.logger = logging.getLogger(__name__)
        self.order = order
        self._inverse_series: Optional[BiSeries] = None

    def series(self, order: Optional[int] = None) -> BiSeries:
        raise NotImplementedError

    def __call__(self, x, y):
        raise NotImplementedError

    def derivative(self, x, y):
        raise NotImplementedError

    def displacement(self, x, y):
        return self(x, y) - np.asarray(y, dtype=complex)

    def inverse_series(self) -> BiSeries:
        if self._inverse_series is None:
            self._inverse_series = series_inverse_y(self.series(self.order))
        return self._inverse_series

    def inverse(self, x, y, tol: float = INVERSE_TOL, max_iter: int = 60):
        """phi^{-1} by Newton, seeded by the truncated series inverse or by y - (phi(y) - y)."""
        y = np.asarray(y, dtype=complex)
        target = np.atleast_1d(y)
        naive = target - self.displacement(x, target)
        formal = self.inverse_series()(x, target)
        bad_naive = np.abs(self(x, naive) - target)
        bad_formal = np.abs(self(x, formal) - target)
        q = np.where(np.isfinite(bad_formal) & (bad_formal < bad_naive), formal, naive)
        err = np.zeros(target.shape)
        for _ in range(max_iter):
            r = self(x, q) - target
            err = np.abs(r)
            if np.all(err <= tol * (1.0 + np.abs(target))):
                return q.reshape(y.shape) if y.ndim else complex(q[0])
            q = q - r / self.derivative(x, q)
        raise OrbitError('inverse map Newton iteration did not converge',
                         {'x': complex(x), 'residual': float(np.max(err))})

    def iterate(self, x, y, n: int):
        """phi^n for n of either sign."""
        for _ in range(abs(n)):
            y = self(x, y) if n > 0 else self.inverse(x, y)
        return y


class UnfoldingMap(AnalyticMap):
    """y o phi = y o exp(X) + pi with pi = p * F^2, F the product of the fixed curves."""

    def __init__(self, normal_field: VectorFieldUnfolding, cofactor: Optional[BiSeries] = None,
                 order: int = DEFAULT_ORDER):
        super().__init__(order)
        self.normal_field = normal_field
        self.curves = normal_field.curves
        self.cofactor = cofactor if cofactor is not None else BiSeries.zero(order)
        self.perturbation = self.cofactor.truncate(order) * self.curves.product_series(order) ** 2
        self._dperturbation = self.perturbation.dy()
        self._forms: Dict[complex, TimeForm] = {}

    @property
    def is_flow(self) -> bool:
        return not np.any(self.perturbation.coeffs)

    def time_form(self, x) -> TimeForm:
        key = complex(x)
        if key not in self._forms:
            self._forms[key] = TimeForm(self.normal_field, key)
        return self._forms[key]

    def series(self, order: Optional[int] = None) -> BiSeries:
        order = self.order if order is None else order
        return lie_exp(self.normal_field.series(order)) + self.perturbation.truncate(order)

    def __call__(self, x, y):
        return self.time_form(x).flow(y) + self.perturbation(x, y)

    def derivative(self, x, y):
        form = self.time_form(x)
        y = np.asarray(y, dtype=complex)
        with np.errstate(divide='ignore', invalid='ignore'):
            ratio = form.vector(form.flow(y)) / form.vector(y)
        ratio = np.where(np.isfinite(ratio), ratio, 1.0)
        return ratio + self._dperturbation(x, y)


class SeriesMap(AnalyticMap):
    """A map given by a polynomial in (x, y), e.g. y + y^2 + y^3."""

    def __init__(self, polynomial: BiSeries, curves: FixedCurveSet):
        super().__init__(polynomial.order)
        if abs(polynomial.coefficient(0, 1) - 1) > ALGEBRAIC_TOL:
            raise SeriesError('map must be tangent to the identity at the origin',
                              {'linear': polynomial.coefficient(0, 1)})
        self.polynomial = polynomial
        self.curves = curves
        self._dy = polynomial.dy()

    def series(self, order: Optional[int] = None) -> BiSeries:
        return self.polynomial.truncate(self.order if order is None else order)

    def __call__(self, x, y):
        return self.polynomial(x, y)

    def derivative(self, x, y):
        return self._dy(x, y)


class Conjugator:
    """sigma(x, y) = (x, y + q * y * prod (y - gamma_j)), fixing every fixed curve pointwise."""

    def __init__(self, cofactor: BiSeries, curves: FixedCurveSet):
        order = cofactor.order
        self.curves = curves
        y = BiSeries.y(order)
        product = BiSeries.constant(1, order)
        for g, _ in curves:
            product = product * (y - BiSeries.from_x_poly(g, order))
        self.map_series = y + cofactor * y * product
        self._dy = self.map_series.dy()

    def __call__(self, x, y):
        return self.map_series(x, y)

    def derivative(self, x, y):
        return self._dy(x, y)

    def inverse(self, x, y, tol: float = INVERSE_TOL, max_iter: int = 60):
        y = np.asarray(y, dtype=complex)
        q = np.atleast_1d(y).copy()
        target = np.atleast_1d(y)
        err = np.zeros(target.shape)
        for _ in range(max_iter):
            r = self(x, q) - target
            err = np.abs(r)
            if np.all(err <= tol * (1.0 + np.abs(target))):
                return q.reshape(y.shape) if y.ndim else complex(q[0])
            q = q - r / self.derivative(x, q)
        raise OrbitError('conjugator inverse did not converge', {'x': complex(x), 'residual': float(np.max(err))})


class ConjugatedMap(AnalyticMap):
    """sigma o phi o sigma^{-1}."""

    def __init__(self, inner: AnalyticMap, sigma: Conjugator):
        super().__init__(inner.order)
        self.inner = inner
        self.sigma = sigma
        self.curves = inner.curves

    def series(self, order: Optional[int] = None) -> BiSeries:
        order = self.order if order is None else order
        s = self.sigma.map_series.truncate(order)
        return s.compose_y(self.inner.series(order).compose_y(series_inverse_y(s)))

    def __call__(self, x, y):
        return self.sigma(x, self.inner(x, self.sigma.inverse(x, y)))

    def derivative(self, x, y):
        pre = self.sigma.inverse(x, y)
        mid = self.inner(x, pre)
        return self.sigma.derivative(x, mid) * self.inner.derivative(x, pre) / self.sigma.derivative(x, pre)
