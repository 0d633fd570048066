"""Recursive dynamical splitting of a vector-field unfolding.

A node of the tree lives in an adapted coordinate t with
y = offset(x) + x^depth * t. A node with several fixed curves is split by
t = x*w into an exterior set (|t| >= rho*|x|), a compact-like set (|w| < rho
away from the child disks) and one child seed per distinct slope zeta of the
curves, with child coordinate w - zeta.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .algebra import ALGEBRAIC_TOL, BiSeries, ComplexPoly, FixedCurveSet
from .errors import LocateError, SplittingError

logger = logging.getLogger(__name__)

SLOPE_DEDUP_TOL = 1e-10

EXTERIOR = 'exterior'
COMPACT_LIKE = 'compact_like'
SEED = 'seed'


class VectorFieldUnfolding:
    """X = x^e * u(x, t) * prod (t - gamma_j(x))^{s_j} d/dt with polynomial unit u."""

    def __init__(self, unit: BiSeries, curves: FixedCurveSet, x_exponent: int = 0, tol: float = ALGEBRAIC_TOL):
        if abs(unit.coefficient(0, 0)) <= tol:
            raise SplittingError('unit must not vanish at the origin', {'u00': unit.coefficient(0, 0)})
        if x_exponent < 0:
            raise SplittingError('x exponent must be nonnegative', {'x_exponent': x_exponent})
        self.unit = unit
        self.curves = curves
        self.x_exponent = int(x_exponent)

    @property
    def nu(self) -> int:
        return self.curves.total - 1

    @property
    def v00(self) -> complex:
        return self.unit.coefficient(0, 0)

    def __call__(self, x, t):
        return np.asarray(x, dtype=complex) ** self.x_exponent * self.unit(x, t) * self.curves.product(x, t)

    def reduced(self, lam: complex, x, t):
        """The field with x^e replaced by lam^e; defined at x = 0."""
        return lam ** self.x_exponent * self.unit(x, t) * self.curves.product(x, t)

    def series(self, order: Optional[int] = None) -> BiSeries:
        order = self.unit.order if order is None else order
        xe = BiSeries.from_terms({(self.x_exponent, 0): 1}, order)
        return xe * self.unit.truncate(order) * self.curves.product_series(order)

    def at_x(self, x: complex) -> ComplexPoly:
        """X(x, .) as a polynomial in t."""
        base = self.unit.at_x(x, 't') * ComplexPoly(self.curves.polynomial_at(x).coeffs, 't')
        return base.scale(complex(x) ** self.x_exponent)

    def __repr__(self):
        return f"VectorFieldUnfolding(e={self.x_exponent}, curves={self.curves!r})"


@dataclass(frozen=True)
class Radii:
    delta: float = 0.05
    epsilon: float = 0.5


@dataclass
class NodeRadii:
    eta: float
    rho: float
    child_eta: float


@dataclass
class SplitNode:
    beta: Tuple[complex, ...]
    kind: str
    field: VectorFieldUnfolding
    e: int
    iota: int
    nu: int
    radii: NodeRadii
    offset: ComplexPoly
    depth: int
    children: List['SplitNode'] = field(default_factory=list)
    poly_field: Optional[ComplexPoly] = None
    slopes: List[Tuple[complex, int]] = field(default_factory=list)
    parent: Optional['SplitNode'] = field(default=None, repr=False, compare=False)

    @property
    def label(self) -> str:
        prefix = 'C' if self.kind == COMPACT_LIKE else 'E'
        return f"{prefix}_{''.join(format_slope(b) for b in self.beta)}"

    @property
    def terminal(self) -> bool:
        return self.kind != COMPACT_LIKE and not self.children

    @property
    def compact(self) -> Optional['SplitNode']:
        """Compact-like child of a non-terminal exterior node."""
        for c in self.children:
            if c.kind == COMPACT_LIKE:
                return c
        return None

    def to_adapted(self, x, y):
        """Adapted coordinate of (x, y); compact-like nodes use w = t/x of their exterior."""
        x = np.asarray(x, dtype=complex)
        d = self.depth + (1 if self.kind == COMPACT_LIKE else 0)
        return (np.asarray(y, dtype=complex) - self.offset(x)) / x ** d

    def from_adapted(self, x, t):
        x = np.asarray(x, dtype=complex)
        d = self.depth + (1 if self.kind == COMPACT_LIKE else 0)
        return self.offset(x) + x ** d * np.asarray(t, dtype=complex)

    def polynomial_field(self, lam: complex = 1.0) -> ComplexPoly:
        return polynomial_field(self, lam)

    def walk(self) -> Iterator['SplitNode']:
        yield self
        for c in self.children:
            yield from c.walk()

    def to_dict(self) -> Dict:
        out = {
            'label': self.label,
            'kind': self.kind,
            'beta': [[b.real, b.imag] for b in self.beta],
            'e': self.e,
            'iota': self.iota,
            'nu': self.nu,
            'radii': {'eta': self.radii.eta, 'rho': self.radii.rho, 'child_eta': self.radii.child_eta},
        }
        if self.poly_field is not None:
            out['poly_field'] = [[c.real, c.imag] for c in self.poly_field.coeffs]
            out['singular_points'] = [{'point': [s.real, s.imag], 'multiplicity': m} for s, m in self.slopes]
        out['children'] = [c.to_dict() for c in self.children]
        return out


class Location(NamedTuple):
    node: SplitNode
    coordinate: complex


class SplittingTree:
    def __init__(self, root: SplitNode, radii: Radii):
        self.root = root
        self.radii = radii
        self.compact_nodes: List[SplitNode] = [n for n in root.walk() if n.kind == COMPACT_LIKE]
        self.nu0 = root.nu

    def nodes(self) -> Iterator[SplitNode]:
        return self.root.walk()

    def find(self, label: str) -> SplitNode:
        for n in self.nodes():
            if n.label == label:
                return n
        raise KeyError(label)

    def locate(self, x: complex, y: complex) -> Location:
        return locate((x, y), self)

    def to_dict(self) -> Dict:
        return {
            'nu0': self.nu0,
            'domain': {'delta': self.radii.delta, 'epsilon': self.radii.epsilon},
            'compact_nodes': [n.label for n in self.compact_nodes],
            'root': self.root.to_dict(),
        }


def format_slope(z: complex) -> str:
    z = complex(z)
    if abs(z.imag) <= SLOPE_DEDUP_TOL and abs(z.real - round(z.real)) <= SLOPE_DEDUP_TOL:
        return str(int(round(z.real)))
    return f"({z.real:.4g}{z.imag:+.4g}j)"


def _group_slopes(curves: FixedCurveSet) -> List[Tuple[complex, List[int]]]:
    groups: List[Tuple[complex, List[int]]] = []
    for idx, s in enumerate(curves.slopes()):
        for g in groups:
            if abs(g[0] - s) <= SLOPE_DEDUP_TOL:
                g[1].append(idx)
                break
        else:
            groups.append((s, [idx]))
    return groups


def _divide_by_x(gamma: ComplexPoly) -> ComplexPoly:
    return ComplexPoly(gamma.coeffs[1:], 'x')


def _blow_up_unit(unit: BiSeries, zeta: complex) -> BiSeries:
    """u(x, x*(t + zeta)), exact."""
    terms = unit.terms()
    order = max((i + 2 * j for i, j in terms), default=0)
    order = max(order, 1)
    base = BiSeries(unit.coeffs, order)
    sub = BiSeries.from_terms({(1, 1): 1, (1, 0): zeta}, order)
    return base.compose_y(sub)


def _factor_series(shifted: ComplexPoly, zeta: complex, order: int) -> BiSeries:
    """t + zeta - g(x) as a series."""
    return BiSeries.y(order) + zeta - BiSeries.from_x_poly(shifted, order)


def _check_unit(unit: BiSeries, eta: float, delta: float, label: str):
    xs = np.concatenate([[0.0], (delta * np.array([0.5, 1.0])[:, None] * np.exp(2j * np.pi * np.arange(8) / 8)).ravel()])
    ts = np.concatenate([[0.0], (eta * np.array([0.5, 1.0])[:, None] * np.exp(2j * np.pi * np.arange(16) / 16)).ravel()])
    X, T = np.meshgrid(xs, ts)
    u00 = unit.coefficient(0, 0)
    spread = float(np.max(np.abs(unit(X, T) - u00)))
    if spread >= abs(u00):
        raise SplittingError(f"unit may vanish inside seed {label}; use smaller radii",
                             {'node': label, 'eta': eta, 'delta': delta, 'spread': spread, 'u00': u00})


def polynomial_field(node: SplitNode, lam: complex = 1.0) -> ComplexPoly:
    """lam^e(C) v(0,0) prod (w - slope)^{s} for a compact-like node."""
    if node.kind != COMPACT_LIKE or node.poly_field is None:
        raise SplittingError('polynomial field requested on a node that is not compact-like', {'node': node.label})
    return node.poly_field.scale(complex(lam) ** node.e)


def _build_node(field_: VectorFieldUnfolding, beta: Tuple[complex, ...], eta: float, offset: ComplexPoly,
                depth: int, radii: Radii, parent: Optional[SplitNode], is_root: bool) -> SplitNode:
    e = field_.x_exponent
    nu = field_.nu
    groups = _group_slopes(field_.curves)
    slopes = [g[0] for g in groups]
    if len(slopes) > 1:
        gaps = [abs(a - b) for i, a in enumerate(slopes) for b in slopes[i + 1:]]
        child_eta = min(eta / 2, 0.25 * min(gaps))
    else:
        child_eta = eta / 2
    rho = 4.0 * (max((abs(s) for s in slopes), default=0.0) + 1.0)
    label_kind = EXTERIOR if (is_root or len(field_.curves) > 1) else SEED
    node = SplitNode(beta=beta, kind=label_kind, field=field_, e=e, iota=e, nu=nu,
                     radii=NodeRadii(eta=eta, rho=rho, child_eta=child_eta),
                     offset=offset, depth=depth, parent=parent)
    if not is_root:
        _check_unit(field_.unit, eta, radii.delta, node.label)

    if len(field_.curves) == 1:
        logger.debug('terminal node %s: e=%d nu=%d', node.label, e, nu)
        return node

    # Compact-like set in w = t / x
    e_c = e + nu
    node.iota = e_c
    blown = _blow_up_unit(field_.unit, 0j)
    scaled = [(_divide_by_x(g), n) for g, n in field_.curves]
    compact_field = VectorFieldUnfolding(blown, FixedCurveSet(scaled, parabolic=False, anchored=False), e_c)
    grouped = [(s, sum(field_.curves.curves[i][1] for i in idx)) for s, idx in groups]
    poly = ComplexPoly.from_roots(grouped, leading=field_.v00, var='w')
    compact = SplitNode(beta=beta, kind=COMPACT_LIKE, field=compact_field, e=e_c, iota=e_c, nu=nu,
                        radii=NodeRadii(eta=eta, rho=rho, child_eta=child_eta),
                        offset=offset, depth=depth, poly_field=poly, slopes=grouped, parent=node)
    node.children.append(compact)
    logger.debug('split %s: e=%d nu=%d slopes=%s', node.label, e, nu, [format_slope(s) for s in slopes])

    # Child seeds, one per distinct slope
    for zeta, idx in groups:
        inside = [(_divide_by_x(field_.curves.curves[i][0]) - zeta, field_.curves.curves[i][1]) for i in idx]
        outside = [(_divide_by_x(field_.curves.curves[i][0]), field_.curves.curves[i][1])
                   for i in range(len(field_.curves)) if i not in idx]
        unit = _blow_up_unit(field_.unit, zeta)
        order = unit.degree() + sum(n * max(1, g.degree) for g, n in outside)
        order = max(order, 1)
        unit = BiSeries(unit.coeffs, order)
        for g, n in outside:
            unit = unit * _factor_series(g, zeta - 0j, order) ** n
        child_offset = offset + ComplexPoly.monomial(depth + 1, zeta, 'x')
        child_field = VectorFieldUnfolding(unit, FixedCurveSet(inside, parabolic=False), e_c)
        child = _build_node(child_field, beta + (complex(zeta),), child_eta, child_offset, depth + 1,
                            radii, compact, is_root=False)
        compact.children.append(child)
    return node


def build_splitting(field_: VectorFieldUnfolding, radii: Optional[Radii] = None) -> SplittingTree:
    radii = radii or Radii()
    if field_.curves.total < 2:
        raise SplittingError('root field must have total multiplicity at least 2', {'total': field_.curves.total})
    _check_unit(field_.unit, radii.epsilon, radii.delta, 'E_0')
    root = _build_node(field_, (0j,), radii.epsilon, ComplexPoly([0], 'x'), 0, radii, None, is_root=True)
    tree = SplittingTree(root, radii)
    logger.debug('splitting built: %d nodes, %d compact-like', sum(1 for _ in tree.nodes()), len(tree.compact_nodes))
    return tree


def locate(point: Tuple[complex, complex], tree: SplittingTree) -> Location:
    """Basic set containing (x, y) and the adapted coordinate there."""
    x, y = complex(point[0]), complex(point[1])
    if abs(x) >= tree.radii.delta:
        raise LocateError('parameter outside the domain', {'x': x, 'delta': tree.radii.delta})
    if abs(y) > tree.radii.epsilon:
        raise LocateError('point outside the domain', {'y': y, 'epsilon': tree.radii.epsilon})
    node = tree.root
    t = y
    while True:
        if node.terminal or x == 0 or abs(t) >= node.radii.rho * abs(x):
            return Location(node, t)
        compact = node.compact
        w = t / x
        for child in compact.children:
            zeta = child.beta[-1]
            if abs(w - zeta) < node.radii.child_eta:
                node, t = child, w - zeta
                break
        else:
            return Location(compact, w)
