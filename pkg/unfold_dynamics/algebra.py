"""Complex polynomials and truncated bivariate power series.

Polynomials are stored with ascending coefficients; series in (x, y) are
stored as dense (D+1)x(D+1) arrays indexed [i, j] for x^i y^j with every
entry above the anti-diagonal i + j = D kept at zero.
"""
import logging
import math
from typing import Dict, Iterable, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.signal import convolve2d

from .errors import ResidueError, RootFindingError, SeriesError

logger = logging.getLogger(__name__)

DEFAULT_ORDER = 20
ALGEBRAIC_TOL = 1e-12
CLUSTER_RADIUS = 1e-5
KNOWN_ROOT_TOL = 1e-8
POLISH_ITERATIONS = 50

Number = Union[int, float, complex]


class ComplexPoly:
    __slots__ = ('coeffs', 'var')

    def __init__(self, coeffs: Iterable[Number], var: str = 'w'):
        c = np.atleast_1d(np.asarray(list(coeffs) if not isinstance(coeffs, np.ndarray) else coeffs, dtype=complex)).copy()
        nz = np.flatnonzero(c)
        c = c[:nz[-1] + 1] if nz.size else np.zeros(1, dtype=complex)
        c.setflags(write=False)
        self.coeffs = c
        self.var = var

    @classmethod
    def from_roots(cls, roots: Sequence[Tuple[Number, int]], leading: Number = 1, var: str = 'w') -> 'ComplexPoly':
        flat = [r for r, m in roots for _ in range(m)]
        c = npoly.polyfromroots(flat) if flat else np.ones(1)
        return cls(np.asarray(c, dtype=complex) * leading, var)

    @classmethod
    def monomial(cls, degree: int, coeff: Number = 1, var: str = 'w') -> 'ComplexPoly':
        c = np.zeros(degree + 1, dtype=complex)
        c[degree] = coeff
        return cls(c, var)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def leading(self) -> complex:
        return complex(self.coeffs[-1])

    def is_zero(self) -> bool:
        return self.degree == 0 and self.coeffs[0] == 0

    def norm(self) -> float:
        return float(np.max(np.abs(self.coeffs)))

    def __call__(self, w):
        return npoly.polyval(w, self.coeffs)

    def derivative(self, m: int = 1) -> 'ComplexPoly':
        if m > self.degree:
            return ComplexPoly([0], self.var)
        return ComplexPoly(npoly.polyder(self.coeffs, m), self.var)

    def taylor(self, at: Number, count: Optional[int] = None) -> np.ndarray:
        """Coefficients of p(at + h) in powers of h."""
        n = self.degree + 1 if count is None else count
        out = np.zeros(n, dtype=complex)
        c = np.array(self.coeffs)
        for k in range(min(n, self.degree + 1)):
            out[k] = npoly.polyval(at, c) / math.factorial(k)
            c = npoly.polyder(c) if len(c) > 1 else np.zeros(1, dtype=complex)
        return out

    def scale(self, factor: Number) -> 'ComplexPoly':
        return ComplexPoly(self.coeffs * factor, self.var)

    def _coerce(self, other) -> np.ndarray:
        if isinstance(other, ComplexPoly):
            return other.coeffs
        return np.asarray([other], dtype=complex)

    def __add__(self, other):
        return ComplexPoly(npoly.polyadd(self.coeffs, self._coerce(other)), self.var)

    __radd__ = __add__

    def __sub__(self, other):
        return ComplexPoly(npoly.polysub(self.coeffs, self._coerce(other)), self.var)

    def __rsub__(self, other):
        return ComplexPoly(npoly.polysub(self._coerce(other), self.coeffs), self.var)

    def __neg__(self):
        return ComplexPoly(-self.coeffs, self.var)

    def __mul__(self, other):
        if isinstance(other, ComplexPoly):
            return ComplexPoly(npoly.polymul(self.coeffs, other.coeffs), self.var)
        return self.scale(other)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        return ComplexPoly(npoly.polypow(self.coeffs, n), self.var)

    def allclose(self, other: 'ComplexPoly', tol: float = 1e-10) -> bool:
        a, b = self.coeffs, other.coeffs
        n = max(len(a), len(b))
        a = np.pad(a, (0, n - len(a)))
        b = np.pad(b, (0, n - len(b)))
        return bool(np.max(np.abs(a - b)) <= tol * max(1.0, float(np.max(np.abs(b)))))

    def __repr__(self):
        return f"ComplexPoly({[complex(c) for c in self.coeffs]}, var={self.var!r})"


def _aberth(monic: np.ndarray, max_iter: int) -> Tuple[np.ndarray, int]:
    n = len(monic) - 1
    centre = -monic[n - 1] / n
    shifted = ComplexPoly(monic).taylor(centre)
    radius = max((abs(shifted[k]) ** (1.0 / (n - k)) for k in range(n)), default=1.0)
    radius = max(radius, 1e-3)
    z = centre + radius * np.exp(1j * (2 * np.pi * np.arange(n) / n + 0.4))
    dmonic = npoly.polyder(monic)
    it = 0
    for it in range(1, max_iter + 1):
        with np.errstate(divide='ignore', invalid='ignore'):
            ratio = npoly.polyval(z, monic) / npoly.polyval(z, dmonic)
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, np.inf)
            repulsion = np.sum(1.0 / diff, axis=1)
            step = ratio / (1.0 - ratio * repulsion)
        bad = ~np.isfinite(step)
        if np.any(bad):
            step[bad] = 1e-8 * (1 + abs(z[bad]))
        z = z - step
        if np.max(np.abs(step) / (1.0 + np.abs(z))) < 1e-15:
            break
    return z, it


def roots(p: ComplexPoly, tol: float = ALGEBRAIC_TOL, max_iter: int = 500,
          cluster_radius: float = CLUSTER_RADIUS) -> List[Tuple[complex, int]]:
    """Roots of p with multiplicities.

    Aberth-Ehrlich simultaneous iteration; approximations closer than
    cluster_radius (relative) are merged and the cluster centre is polished
    by Newton on the (m-1)-th derivative.
    """
    if p.is_zero():
        raise RootFindingError('roots of the zero polynomial', {'coeffs': []})
    if p.degree == 0:
        return []
    monic = np.asarray(p.coeffs) / p.leading
    if p.degree == 1:
        return [(complex(-monic[0]), 1)]
    z, iterations = _aberth(monic, max_iter)

    clusters: List[List[complex]] = []
    for r in sorted(z, key=lambda v: (round(v.real, 6), v.imag)):
        for cl in clusters:
            c = np.mean(cl)
            if abs(r - c) <= cluster_radius * (1 + abs(c)):
                cl.append(r)
                break
        else:
            clusters.append([r])

    found = []
    for cl in clusters:
        m = len(cl)
        c = complex(np.mean(cl))
        q = p.derivative(m - 1)
        dq = q.derivative()
        for _ in range(POLISH_ITERATIONS):
            d = dq(c)
            if d == 0:
                break
            nc = c - q(c) / d
            if abs(q(nc)) >= abs(q(c)):
                break
            c = nc
        found.append((c, m))

    rebuilt = ComplexPoly.from_roots(found, leading=p.leading)
    residual = float(np.max(np.abs(np.pad(rebuilt.coeffs, (0, max(0, p.degree - rebuilt.degree))) - p.coeffs)))
    logger.debug('roots: degree %d, %d iterations, %d clusters, residual %.3e', p.degree, iterations, len(found), residual)
    if rebuilt.degree != p.degree or residual > max(tol, 1e-10) * max(1.0, p.norm()):
        raise RootFindingError('root finder did not reconstruct the polynomial',
                               {'residual': residual, 'iterations': iterations, 'degree': p.degree})
    return found


def _series_reciprocal(a: np.ndarray, n: int) -> np.ndarray:
    """First n coefficients of 1/A(h) for a power series with a[0] != 0."""
    b = np.zeros(n, dtype=complex)
    b[0] = 1.0 / a[0]
    for k in range(1, n):
        upto = min(k, len(a) - 1)
        s = sum(a[j] * b[k - j] for j in range(1, upto + 1))
        b[k] = -s / a[0]
    return b


def _taylor_scale(p: ComplexPoly, at: complex) -> float:
    return float(np.sum(np.abs(p.coeffs) * (1.0 + abs(at)) ** np.arange(len(p.coeffs))))


def _check_vanishing(p: ComplexPoly, root: complex, multiplicity: int, tol: float) -> Tuple[np.ndarray, float]:
    """Taylor coefficients at root, after checking that the first m vanish."""
    if multiplicity > p.degree:
        raise ResidueError('multiplicity exceeds degree', {'root': root, 'multiplicity': multiplicity})
    c = p.taylor(root)
    scale = _taylor_scale(p, root)
    low = np.abs(c[:multiplicity])
    if np.any(low > tol * scale):
        raise ResidueError('multiplicity mismatch: lower Taylor coefficients do not vanish at the root',
                           {'root': root, 'multiplicity': multiplicity, 'value': float(np.max(low))})
    return c, scale


def _local_expansion(p: ComplexPoly, root: complex, multiplicity: int, tol: float) -> np.ndarray:
    """Coefficients of (w-root)^m / p(w) in powers of (w-root), up to order m-1."""
    c, scale = _check_vanishing(p, root, multiplicity, tol)
    lead = c[multiplicity]
    if abs(lead) <= tol * scale:
        raise ResidueError('multiplicity mismatch: derivative of stated order vanishes at the root',
                           {'root': root, 'multiplicity': multiplicity, 'value': abs(lead)})
    return _series_reciprocal(c[multiplicity:], multiplicity)


def _factored_expansion(found: Sequence[Tuple[Number, int]], index: int, leading: complex) -> np.ndarray:
    """Same coefficients as _local_expansion, read off leading * prod (w - r_j)^m_j."""
    r, m = complex(found[index][0]), found[index][1]
    acc = np.zeros(m, dtype=complex)
    acc[0] = leading
    for j, (s, n) in enumerate(found):
        if j == index:
            continue
        gap = r - complex(s)
        if gap == 0:
            raise ResidueError('repeated root in the factorization', {'root': r})
        factor = np.array([math.comb(n, i) * gap ** (n - i) for i in range(min(n, m - 1) + 1)], dtype=complex)
        acc = np.convolve(acc, factor)[:m]
    return _series_reciprocal(acc, m)


def residue(p: ComplexPoly, root: Number, multiplicity: int = 1, tol: float = ALGEBRAIC_TOL) -> complex:
    """Coefficient of 1/(w-root) in the Laurent expansion of 1/p at root."""
    local = _local_expansion(p, complex(root), multiplicity, tol)
    return complex(local[multiplicity - 1])


class PartialFraction(NamedTuple):
    root: complex
    order: int
    coeff: complex


def partial_fractions(p: ComplexPoly, tol: float = ALGEBRAIC_TOL,
                      known_roots: Optional[Sequence[Tuple[Number, int]]] = None) -> List[PartialFraction]:
    """1/p = sum coeff/(w-root)^order, terms grouped by root, highest order first.

    Coefficients are read off the factored form; Taylor coefficients of p
    cancel badly at clustered roots.
    """
    if p.is_zero() or p.degree < 1:
        raise RootFindingError('partial fractions need degree >= 1', {'degree': p.degree})
    found = list(known_roots) if known_roots is not None else roots(p, tol)
    if sum(m for _, m in found) != p.degree:
        raise RootFindingError('root multiplicities do not add up to the degree',
                               {'degree': p.degree, 'multiplicities': [m for _, m in found]})
    if known_roots is not None:
        for r, m in found:
            _check_vanishing(p, complex(r), m, KNOWN_ROOT_TOL)
    terms = []
    for i, (r, m) in enumerate(found):
        local = _factored_expansion(found, i, p.leading)
        for order in range(m, 0, -1):
            terms.append(PartialFraction(complex(r), order, complex(local[m - order])))
    return terms


def evaluate_partial_fractions(terms: Sequence[PartialFraction], w):
    w = np.asarray(w, dtype=complex)
    total = np.zeros_like(w)
    for t in terms:
        total = total + t.coeff / (w - t.root) ** t.order
    return total


class BiSeries:
    """Truncated power series sum c[i, j] x^i y^j with i + j <= order."""

    __slots__ = ('coeffs', 'order')

    def __init__(self, coeffs, order: int = DEFAULT_ORDER):
        arr = np.zeros((order + 1, order + 1), dtype=complex)
        src = np.asarray(coeffs, dtype=complex)
        if src.ndim != 2:
            raise SeriesError('series coefficients must be a 2-d array', {'shape': list(src.shape)})
        ni, nj = min(src.shape[0], order + 1), min(src.shape[1], order + 1)
        arr[:ni, :nj] = src[:ni, :nj]
        arr[_above_diagonal(order)] = 0
        self.coeffs = arr
        self.order = order

    @classmethod
    def zero(cls, order: int = DEFAULT_ORDER) -> 'BiSeries':
        return cls(np.zeros((1, 1)), order)

    @classmethod
    def from_terms(cls, terms: Union[Dict[Tuple[int, int], Number], Iterable[Tuple[int, int, Number]]],
                   order: int = DEFAULT_ORDER) -> 'BiSeries':
        items = terms.items() if isinstance(terms, dict) else (((i, j), c) for i, j, c in terms)
        arr = np.zeros((order + 1, order + 1), dtype=complex)
        for (i, j), c in items:
            if i < 0 or j < 0:
                raise SeriesError('negative exponent', {'monomial': [i, j]})
            if i + j <= order:
                arr[i, j] += c
        return cls(arr, order)

    @classmethod
    def constant(cls, c: Number, order: int = DEFAULT_ORDER) -> 'BiSeries':
        return cls.from_terms({(0, 0): c}, order)

    @classmethod
    def x(cls, order: int = DEFAULT_ORDER) -> 'BiSeries':
        return cls.from_terms({(1, 0): 1}, order)

    @classmethod
    def y(cls, order: int = DEFAULT_ORDER) -> 'BiSeries':
        return cls.from_terms({(0, 1): 1}, order)

    @classmethod
    def from_x_poly(cls, p: ComplexPoly, order: int = DEFAULT_ORDER) -> 'BiSeries':
        return cls(np.asarray(p.coeffs, dtype=complex)[:, None], order)

    def terms(self) -> Dict[Tuple[int, int], complex]:
        idx = np.argwhere(self.coeffs != 0)
        return {(int(i), int(j)): complex(self.coeffs[i, j]) for i, j in idx}

    def coefficient(self, i: int, j: int) -> complex:
        if i + j > self.order:
            return 0j
        return complex(self.coeffs[i, j])

    def copy(self) -> 'BiSeries':
        return BiSeries(self.coeffs, self.order)

    def truncate(self, order: int) -> 'BiSeries':
        return BiSeries(self.coeffs, order)

    def low_order(self) -> Optional[int]:
        """Lowest total degree with a nonzero coefficient, None for zero."""
        idx = np.argwhere(self.coeffs != 0)
        return int(idx.sum(axis=1).min()) if idx.size else None

    def degree(self) -> int:
        """Highest total degree with a nonzero coefficient."""
        idx = np.argwhere(self.coeffs != 0)
        return int(idx.sum(axis=1).max()) if idx.size else 0

    def chop(self, rel_tol: float = 1e-14) -> 'BiSeries':
        """Zero the coefficients below rel_tol times the largest one."""
        scale = float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0
        c = self.coeffs.copy()
        c[np.abs(c) <= rel_tol * scale] = 0
        return BiSeries(c, self.order)

    def y_degree(self) -> int:
        cols = np.flatnonzero(np.any(self.coeffs != 0, axis=0))
        return int(cols[-1]) if cols.size else 0

    def _check(self, other: 'BiSeries') -> int:
        return min(self.order, other.order)

    def __add__(self, other):
        if isinstance(other, BiSeries):
            n = self._check(other)
            return BiSeries(self.coeffs[:n + 1, :n + 1] + other.coeffs[:n + 1, :n + 1], n)
        out = self.coeffs.copy()
        out[0, 0] += other
        return BiSeries(out, self.order)

    __radd__ = __add__

    def __neg__(self):
        return BiSeries(-self.coeffs, self.order)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, BiSeries):
            n = self._check(other)
            prod = convolve2d(self.coeffs[:n + 1, :n + 1], other.coeffs[:n + 1, :n + 1])
            return BiSeries(prod[:n + 1, :n + 1], n)
        return BiSeries(self.coeffs * other, self.order)

    __rmul__ = __mul__

    def __pow__(self, n: int):
        result = BiSeries.constant(1, self.order)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def dy(self) -> 'BiSeries':
        c = self.coeffs[:, 1:] * np.arange(1, self.order + 1)[None, :]
        return BiSeries(c, self.order)

    def dx(self) -> 'BiSeries':
        c = self.coeffs[1:, :] * np.arange(1, self.order + 1)[:, None]
        return BiSeries(c, self.order)

    def compose_y(self, g: 'BiSeries') -> 'BiSeries':
        """self(x, g(x, y)); g must vanish at the origin."""
        if abs(g.coefficient(0, 0)) > 0:
            raise SeriesError('substituted series must vanish at the origin', {'constant': g.coefficient(0, 0)})
        n = self._check(g)
        result = BiSeries(self.coeffs[:, n:n + 1], n)
        for j in range(n - 1, -1, -1):
            result = result * g + BiSeries(self.coeffs[:, j:j + 1], n)
        return result

    def divmod_y(self, divisor: 'BiSeries') -> Tuple['BiSeries', 'BiSeries']:
        """Division in y by a divisor monic in y whose terms have total degree >= its y-degree."""
        m = divisor.y_degree()
        if abs(divisor.coefficient(0, m) - 1) > 1e-14 or np.any(divisor.coeffs[1:, m] != 0):
            raise SeriesError('divisor must be monic in y', {'y_degree': m})
        n = self._check(divisor)
        rem = self.truncate(n)
        quo = np.zeros((n + 1, n + 1), dtype=complex)
        for j in range(n, m - 1, -1):
            lead = rem.coeffs[:, j].copy()
            if not np.any(lead):
                continue
            shift = np.zeros((n + 1, n + 1), dtype=complex)
            shift[:, j - m] = lead
            quo[:, j - m] += lead
            rem = rem - BiSeries(shift, n) * divisor
            rem.coeffs[:, j] = 0
        return BiSeries(quo, n), rem

    def at_x(self, x: Number, var: str = 'y') -> ComplexPoly:
        """Polynomial in y obtained by fixing x."""
        powers = np.asarray(x, dtype=complex) ** np.arange(self.order + 1)
        return ComplexPoly(powers @ self.coeffs, var)

    def restrict_x0(self) -> ComplexPoly:
        return ComplexPoly(self.coeffs[0, :], 'y')

    def __call__(self, x, y):
        x, y = np.broadcast_arrays(np.asarray(x, dtype=complex), np.asarray(y, dtype=complex))
        return npoly.polyval2d(x, y, self.coeffs)

    def allclose(self, other: 'BiSeries', tol: float = 1e-10) -> bool:
        n = self._check(other)
        d = self.coeffs[:n + 1, :n + 1] - other.coeffs[:n + 1, :n + 1]
        return bool(np.max(np.abs(d)) <= tol)

    def __repr__(self):
        return f"BiSeries(order={self.order}, terms={len(self.terms())})"


def _above_diagonal(order: int) -> np.ndarray:
    i, j = np.indices((order + 1, order + 1))
    return i + j > order


def series_inverse_y(f: BiSeries, tol: float = ALGEBRAIC_TOL) -> BiSeries:
    """g with f(x, g(x, y)) = y modulo the truncation order, x fixed."""
    if abs(f.coefficient(0, 1) - 1) > tol or abs(f.coefficient(0, 0)) > tol:
        raise SeriesError('series must be y + higher order terms',
                          {'linear': f.coefficient(0, 1), 'constant': f.coefficient(0, 0)})
    y = BiSeries.y(f.order)
    h = f - y
    g = y
    for _ in range(f.order):
        g = y - h.compose_y(g)
    return g


def lie_exp(field: BiSeries, target: Optional[BiSeries] = None) -> BiSeries:
    """exp(field d/dy) applied to target (default y), truncated at the series order."""
    order = field.order
    term = BiSeries.y(order) if target is None else target.truncate(order)
    total = term
    for j in range(1, order + 1):
        term = field * term.dy() * (1.0 / j)
        if not np.any(term.coeffs):
            break
        total = total + term
    return total


class FixedCurveSet:
    """Fixed curves y = gamma_j(x) with multiplicities, gamma_j(0) = 0."""

    def __init__(self, curves: Sequence[Tuple[ComplexPoly, int]], tol: float = ALGEBRAIC_TOL, parabolic: bool = True,
                 anchored: bool = True):
        normalized = []
        for gamma, n in curves:
            gamma = gamma if isinstance(gamma, ComplexPoly) else ComplexPoly(gamma, 'x')
            gamma = ComplexPoly(gamma.coeffs, 'x')
            if anchored and abs(gamma.coeffs[0]) > tol:
                raise SeriesError('fixed curve must pass through the origin', {'gamma0': complex(gamma.coeffs[0])})
            if int(n) < 1:
                raise SeriesError('multiplicity must be positive', {'multiplicity': n})
            normalized.append((gamma, int(n)))
        for a in range(len(normalized)):
            for b in range(a + 1, len(normalized)):
                if (normalized[a][0] - normalized[b][0]).norm() <= tol:
                    raise SeriesError('fixed curves must be pairwise distinct', {'pair': [a, b]})
        total = sum(n for _, n in normalized)
        if total < (2 if parabolic else 1):
            raise SeriesError('total multiplicity too small', {'total': total})
        self.curves: Tuple[Tuple[ComplexPoly, int], ...] = tuple(normalized)

    def __len__(self):
        return len(self.curves)

    def __iter__(self):
        return iter(self.curves)

    @property
    def total(self) -> int:
        return sum(n for _, n in self.curves)

    @property
    def nu(self) -> int:
        return self.total - 1

    def values(self, x: Number) -> List[Tuple[complex, int]]:
        return [(complex(g(x)), n) for g, n in self.curves]

    def slopes(self) -> List[complex]:
        return [complex(g.coeffs[1]) if g.degree >= 1 else 0j for g, _ in self.curves]

    def product(self, x, y):
        out = np.ones(np.broadcast(np.asarray(x), np.asarray(y)).shape, dtype=complex)
        for g, n in self.curves:
            out = out * (y - g(x)) ** n
        return out

    def product_series(self, order: int = DEFAULT_ORDER) -> BiSeries:
        y = BiSeries.y(order)
        out = BiSeries.constant(1, order)
        for g, n in self.curves:
            out = out * (y - BiSeries.from_x_poly(g, order)) ** n
        return out

    def polynomial_at(self, x: Number) -> ComplexPoly:
        return ComplexPoly.from_roots(self.values(x), var='y')

    def __repr__(self):
        return f"FixedCurveSet({[(list(g.coeffs), n) for g, n in self.curves]})"
