"""Residue combinatorics of compact-like nodes and stable multi-directions.

Unstable curves are kept analytically as offsets theta (mod pi) of the
relation e*arg(lambda) + arg(mu) = theta; singular directions of a level are
the lambdas solving it with mu = i.
"""
import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .algebra import ComplexPoly, partial_fractions
from .errors import DirectionError
from .splitting import COMPACT_LIKE, SplitNode, SplittingTree, locate

logger = logging.getLogger(__name__)

UNSTABLE_TOL = 1e-9
MAX_SINGULAR_POINTS = 12
OFFSET_DEDUP_TOL = 1e-12
HALF_PI = math.pi / 2


def _mod_pi(a):
    return np.mod(a, math.pi)


def _dist_mod_pi(a, b):
    d = np.mod(np.asarray(a) - np.asarray(b), math.pi)
    return np.minimum(d, math.pi - d)


@dataclass
class ResidueProfile:
    points: List[Tuple[complex, int]]
    residues: List[complex]
    subset_sums: List[complex]


@dataclass(frozen=True)
class UnstableCurve:
    level: int
    offset: float

    def contains(self, lam: complex, mu: complex, tol: float = 1e-9) -> bool:
        a = self.level * np.angle(lam) + np.angle(mu)
        return bool(_dist_mod_pi(a, self.offset) <= tol)


def _residues(p: ComplexPoly, points: Optional[Sequence[Tuple[complex, int]]] = None) -> Tuple[List[Tuple[complex, int]], List[complex]]:
    terms = partial_fractions(p, known_roots=points)
    by_root: Dict[complex, complex] = {}
    order: List[Tuple[complex, int]] = []
    for t in terms:
        if t.root not in by_root:
            by_root[t.root] = 0j
            order.append((t.root, t.order))
        if t.order == 1:
            by_root[t.root] += t.coeff
    return order, [by_root[r] for r, _ in order]


def _subset_sums(residues: Sequence[complex]) -> List[complex]:
    n = len(residues)
    if n > MAX_SINGULAR_POINTS:
        raise DirectionError('too many singular points for subset enumeration',
                             {'points': n, 'cap': MAX_SINGULAR_POINTS})
    sums = []
    for size in range(1, n + 1):
        for combo in combinations(residues, size):
            sums.append(complex(sum(combo)))
    return sums


def residue_profile(p: ComplexPoly, points: Optional[Sequence[Tuple[complex, int]]] = None) -> ResidueProfile:
    found, res = _residues(p, points)
    return ResidueProfile(points=found, residues=res, subset_sums=_subset_sums(res))


def node_profile(node: SplitNode) -> ResidueProfile:
    if node.kind != COMPACT_LIKE:
        raise DirectionError('residue profile needs a compact-like node', {'node': node.label})
    return residue_profile(node.poly_field, node.slopes)


def _is_unstable_sum(r: complex, tol: float = UNSTABLE_TOL) -> bool:
    # 2*pi*i*r real and nonzero
    return abs(2 * math.pi * r.real) < tol and abs(r) > tol


def in_x_infinity(p: ComplexPoly, tol: float = UNSTABLE_TOL,
                  points: Optional[Sequence[Tuple[complex, int]]] = None) -> bool:
    """True when no subset of singular points has 2*pi*i*(residue sum) in R minus {0}."""
    if p.degree < 2:
        raise DirectionError('stability test needs degree >= 2', {'degree': p.degree})
    profile = residue_profile(p, points)
    return not any(_is_unstable_sum(r, tol) for r in profile.subset_sums)


def _offsets(sums: Sequence[complex], level: int) -> List[UnstableCurve]:
    offsets: List[float] = []
    for r in sums:
        if abs(r) <= UNSTABLE_TOL:
            continue
        theta = float(_mod_pi(np.angle(r) + HALF_PI))
        if all(_dist_mod_pi(theta, o) > OFFSET_DEDUP_TOL for o in offsets):
            offsets.append(theta)
    return [UnstableCurve(level, o) for o in sorted(offsets)]


def unstable_curves(node: SplitNode) -> List[UnstableCurve]:
    """Curves e*arg(lambda) + arg(mu) = arg(r) + pi/2 (mod pi), one per nonzero subset sum r."""
    return _offsets(node_profile(node).subset_sums, node.e)


@dataclass
class DirectionAtlas:
    levels: List[int]
    offsets: Dict[int, List[float]]
    node_curves: Dict[str, List[UnstableCurve]] = field(default_factory=dict)

    @property
    def q(self) -> int:
        return len(self.levels)

    def singular_angles(self, k: int) -> List[float]:
        """Angles in [0, 2pi) of the singular directions of level index k (1-based)."""
        e = self.levels[k - 1]
        out = set()
        for theta in self.offsets[e]:
            for m in range(2 * e):
                out.add(round(float(np.mod((theta - HALF_PI + m * math.pi) / e, 2 * math.pi)), 15))
        return sorted(out)

    def singular_directions(self, k: int) -> List[complex]:
        return [complex(np.exp(1j * a)) for a in self.singular_angles(k)]

    def distance(self, k: int, lam: complex) -> float:
        """Distance mod pi from e*arg(lambda) + pi/2 to the nearest unstable offset of level k."""
        e = self.levels[k - 1]
        a = e * np.angle(lam) + HALF_PI
        return float(min(_dist_mod_pi(a, o) for o in self.offsets[e]))

    def is_singular(self, k: int, lam: complex, tol: float = UNSTABLE_TOL) -> bool:
        return self.distance(k, lam) <= tol

    def to_dict(self) -> Dict:
        return {
            'levels': self.levels,
            'singular_directions': {str(e): self.singular_angles(i + 1) for i, e in enumerate(self.levels)},
            'unstable_offsets': {label: [{'level': c.level, 'offset': c.offset} for c in curves]
                                 for label, curves in self.node_curves.items()},
        }


def direction_atlas(tree: SplittingTree) -> DirectionAtlas:
    offsets: Dict[int, List[float]] = {}
    node_curves: Dict[str, List[UnstableCurve]] = {}
    for node in tree.compact_nodes:
        curves = unstable_curves(node)
        node_curves[node.label] = curves
        if not curves:
            continue
        bucket = offsets.setdefault(node.e, [])
        for c in curves:
            if all(_dist_mod_pi(c.offset, o) > OFFSET_DEDUP_TOL for o in bucket):
                bucket.append(c.offset)
    for e in offsets:
        offsets[e].sort()
    levels = sorted(offsets)
    logger.debug('direction atlas: levels %s', levels)
    return DirectionAtlas(levels=levels, offsets=offsets, node_curves=node_curves)


# Admissible tuples

def _arg_diff(a: float, b: float) -> float:
    """a - b reduced to (-pi, pi]."""
    d = math.remainder(a - b, 2 * math.pi)
    return d


@dataclass
class AdmissibleTuple:
    lambdas: List[complex]
    upsilon: float

    def interval(self, atlas: DirectionAtlas, k: int, upsilon: Optional[float] = None) -> Tuple[float, float]:
        """Half-open description of I_k(lambda_k, upsilon) as (centre angle, half-width)."""
        u = self.upsilon if upsilon is None else upsilon
        return float(np.angle(self.lambdas[k - 1])), math.pi / (2 * atlas.levels[k - 1]) + u

    def contains(self, atlas: DirectionAtlas, k: int, lam: complex, upsilon: Optional[float] = None) -> bool:
        centre, half = self.interval(atlas, k, upsilon)
        return abs(_arg_diff(float(np.angle(lam)), centre)) <= half + 1e-15


def admissible_tuple(atlas: DirectionAtlas, lambdas: Sequence[complex]) -> AdmissibleTuple:
    """Validate membership in the admissible set and compute upsilon."""
    lambdas = [complex(l) / abs(l) for l in lambdas]
    if len(lambdas) != atlas.q:
        raise DirectionError('tuple length must equal the number of levels', {'levels': atlas.levels, 'given': len(lambdas)})
    ups = []
    for k in range(1, atlas.q + 1):
        e = atlas.levels[k - 1]
        d = atlas.distance(k, lambdas[k - 1])
        if d <= UNSTABLE_TOL:
            raise DirectionError('tuple entry is a singular direction', {'level': e, 'lambda': lambdas[k - 1]})
        ups.append(min(d / (8 * e), math.pi / (16 * e * len(atlas.offsets[e]))))
    for k in range(1, atlas.q):
        e0, e1 = atlas.levels[k - 1], atlas.levels[k]
        gap = abs(_arg_diff(float(np.angle(lambdas[k])), float(np.angle(lambdas[k - 1]))))
        if gap + math.pi / (2 * e1) > math.pi / (2 * e0) + 1e-12:
            raise DirectionError('tuple intervals are not nested', {'level': e1, 'gap': gap})
    upsilon = min(ups) if ups else math.pi / 16
    return AdmissibleTuple(lambdas=lambdas, upsilon=upsilon)


def default_tuple(atlas: DirectionAtlas, lam: complex) -> AdmissibleTuple:
    """(lam, ..., lam), nudged off the singular directions; nesting holds since levels increase."""
    lam = complex(lam) / abs(lam)
    angle = float(np.angle(lam))
    for _ in range(64):
        bad = [k for k in range(1, atlas.q + 1) if atlas.distance(k, np.exp(1j * angle)) < 1e-3]
        if not bad:
            break
        angle += math.pi / (8 * max(atlas.levels) * 16)
    return admissible_tuple(atlas, [np.exp(1j * angle)] * atlas.q)


# Multi-directions

@dataclass(frozen=True)
class LevelDirection:
    level: int
    varying: bool
    anchor: float
    slope: float
    constant: float

    def theta(self, angle):
        if not self.varying:
            return np.full(np.shape(angle), self.constant) if np.ndim(angle) else self.constant
        rel = np.remainder(np.asarray(angle) - self.anchor + math.pi, 2 * math.pi) - math.pi
        return HALF_PI - self.slope * rel


@dataclass
class MultiDirection:
    centre: float
    half_width: float
    levels: List[int]
    parts: List[LevelDirection]

    def in_arc(self, angle: float, tol: float = 1e-12) -> bool:
        return abs(_arg_diff(angle, self.centre)) <= self.half_width + tol

    def theta(self, level: int, angle):
        for p in self.parts:
            if p.level == level:
                return p.theta(angle)
        raise DirectionError('level not in multi-direction', {'level': level, 'levels': self.levels})

    def mu(self, level: int, angle) -> complex:
        return np.exp(1j * self.theta(level, angle))

    def samples(self, n: int = 33) -> Dict:
        angles = self.centre + np.linspace(-self.half_width, self.half_width, n)
        return {
            'angles': angles.tolist(),
            'theta': {str(p.level): np.atleast_1d(p.theta(angles)).tolist() for p in self.parts},
        }


def _frozen_constant(atlas: DirectionAtlas, k: int, lam_angle: float, upsilon: float) -> float:
    e = atlas.levels[k - 1]
    centre = round(lam_angle / upsilon) * upsilon
    lo, hi = centre - 1.5 * upsilon, centre + 1.5 * upsilon
    candidates = np.linspace(math.pi / 4, 3 * math.pi / 4, 2001)
    best = np.full(candidates.shape, np.inf)
    for theta in atlas.offsets[e]:
        # forbidden mu-angles: theta - e*arg(lambda') for arg(lambda') in [lo, hi]
        f_hi = theta - e * lo
        width = e * (hi - lo)
        rel = np.mod(f_hi - candidates, math.pi)
        inside = rel <= width
        d = np.where(inside, 0.0, np.minimum(rel - width, math.pi - rel))
        best = np.minimum(best, d)
    idx = int(np.argmax(best))
    if best[idx] <= UNSTABLE_TOL:
        raise DirectionError('no admissible constant on the covering arc', {'level': e, 'arc': [lo, hi]})
    return float(candidates[idx])


def build_aleph(atlas: DirectionAtlas, tup: Optional[AdmissibleTuple], lam: complex, k: int) -> MultiDirection:
    """Stable multi-direction on lam*exp(i[-upsilon, upsilon]) varying in levels 1..k."""
    lam = complex(lam) / abs(lam)
    angle = float(np.angle(lam))
    if atlas.q == 0:
        return MultiDirection(centre=angle, half_width=math.pi / 16, levels=[], parts=[])
    if tup is None:
        raise DirectionError('an admissible tuple is required when levels exist', {'levels': atlas.levels})
    if not 0 <= k <= atlas.q:
        raise DirectionError('level index out of range', {'k': k, 'q': atlas.q})
    if k > 0 and not tup.contains(atlas, k, lam):
        raise DirectionError('base direction outside I_k(lambda_k, upsilon)', {'k': k, 'lambda': lam})
    ups = tup.upsilon
    parts = []
    for j in range(1, atlas.q + 1):
        e = atlas.levels[j - 1]
        if j <= k:
            d = atlas.distance(j, tup.lambdas[j - 1])
            c = (d / 2) / (math.pi / (2 * e) + 2 * ups)
            parts.append(LevelDirection(e, True, float(np.angle(tup.lambdas[j - 1])), e - c, HALF_PI))
        else:
            parts.append(LevelDirection(e, False, angle, 0.0, _frozen_constant(atlas, j, angle, ups)))
    return MultiDirection(centre=angle, half_width=ups, levels=list(atlas.levels), parts=parts)


@dataclass
class Configuration:
    """A direction configuration (Lambda, lambda): an admissible tuple and a base direction."""
    tup: AdmissibleTuple
    lam: complex

    def depth(self, atlas: DirectionAtlas) -> int:
        """Largest level index j with lam in I_j(lambda_j, 0); 0 when there is none."""
        return max((j for j in range(1, atlas.q + 1) if self.tup.contains(atlas, j, self.lam, upsilon=0.0)),
                   default=0)

    def aleph(self, atlas: DirectionAtlas) -> MultiDirection:
        return build_aleph(atlas, self.tup, self.lam, self.depth(atlas))


def agreement_depth(atlas: DirectionAtlas, first: Configuration, second: Configuration, tol: float = 1e-12) -> int:
    """0 for different tuples, else the smaller of the two depths."""
    a, b = first.tup.lambdas, second.tup.lambdas
    if len(a) != len(b) or any(abs(u - v) > tol for u, v in zip(a, b)):
        return 0
    return min(first.depth(atlas), second.depth(atlas))


def predicted_flatness(atlas: DirectionAtlas, first: Configuration, second: Configuration) -> Optional[float]:
    """Level e_(d+1) above the agreement depth d; None when the configurations agree on every level."""
    d = agreement_depth(atlas, first, second)
    return float(atlas.levels[d]) if d < atlas.q else None


def configuration_pair(atlas: DirectionAtlas, angle: float,
                       spread: Optional[float] = None) -> Tuple[Configuration, Configuration]:
    """Two configurations on the ray direction angle, with tuples rotated by -+spread (default pi/(4 e_1))."""
    if atlas.q == 0:
        raise DirectionError('configurations need at least one level', {'levels': atlas.levels})
    spread = math.pi / (4 * atlas.levels[0]) if spread is None else spread
    lam = complex(np.exp(1j * angle))
    return tuple(Configuration(default_tuple(atlas, np.exp(1j * (angle + sign * spread))), lam)
                 for sign in (-1, 1))


def check_multi_direction(atlas: DirectionAtlas, aleph: MultiDirection, n: int = 1000) -> float:
    """Smallest distance mod pi to an unstable offset over n samples per level."""
    angles = aleph.centre + np.linspace(-aleph.half_width, aleph.half_width, n)
    worst = math.pi
    for p in aleph.parts:
        vals = p.level * angles + np.asarray(p.theta(angles))
        for o in atlas.offsets[p.level]:
            worst = min(worst, float(np.min(_dist_mod_pi(vals, o))))
    return worst


# Interpolated field on the ambient domain

def smoothstep(s):
    """1 on (-inf, 1.25], 0 on [1.75, inf), C-infinity in between."""
    s = np.asarray(s, dtype=float)
    u = np.clip((s - 1.25) / 0.5, 0.0, 1.0)

    def bump(a):
        with np.errstate(divide='ignore', over='ignore'):
            return np.where(a > 0, np.exp(-1.0 / np.where(a > 0, a, 1.0)), 0.0)

    a, b = bump(1.0 - u), bump(u)
    return a / (a + b)


def _node_value(aleph: MultiDirection, node: Optional[SplitNode], angle: float) -> float:
    """Angle in (0, pi) of the direction attached to a basic set."""
    if node is None:
        return HALF_PI
    if node.kind == COMPACT_LIKE:
        if node.e in aleph.levels:
            return float(aleph.theta(node.e, angle))
        return HALF_PI
    # exterior and seed sets inherit from the compact-like parent
    return _node_value(aleph, node.parent, angle)


def aleph_star(aleph: MultiDirection, tree: SplittingTree, point: Tuple[complex, complex]) -> complex:
    x, y = complex(point[0]), complex(point[1])
    if x == 0:
        return 1j
    angle = float(np.angle(x))
    if not aleph.in_arc(angle):
        raise DirectionError('parameter direction outside the multi-direction arc',
                             {'angle': angle, 'centre': aleph.centre, 'half_width': aleph.half_width})
    node, t = locate((x, y), tree)
    if node.kind == COMPACT_LIKE:
        return complex(np.exp(1j * _node_value(aleph, node, angle)))
    theta0 = _node_value(aleph, node.parent, angle)
    if node.terminal:
        return complex(np.exp(1j * theta0))
    theta1 = _node_value(aleph, node.compact, angle)
    s = abs(t) / (node.radii.rho * abs(x))
    return complex(np.exp(1j * (theta0 + (theta1 - theta0) * float(smoothstep(s)))))
