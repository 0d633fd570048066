import numpy as np
import pytest

from unfold_dynamics.algebra import (BiSeries, ComplexPoly, FixedCurveSet, evaluate_partial_fractions, lie_exp,
                                     partial_fractions, residue, roots, series_inverse_y)
from unfold_dynamics.errors import ResidueError, RootFindingError, SeriesError


def test_roots_simple():
    p = ComplexPoly.from_roots([(1, 1), (-1, 1), (2j, 1)], leading=3)
    found = sorted(roots(p), key=lambda r: (r[0].real, r[0].imag))
    expected = [(-1, 1), (2j, 1), (1, 1)]
    for (r, m), (e, n) in zip(found, expected):
        assert abs(r - e) < 1e-10
        assert m == n


def test_roots_multiplicity_cluster():
    p = ComplexPoly.from_roots([(0.5, 2), (-1, 1)])
    found = dict((round(r.real, 6), m) for r, m in roots(p))
    assert found == {0.5: 2, -1.0: 1}


def test_roots_of_zero_polynomial():
    with pytest.raises(RootFindingError):
        roots(ComplexPoly([0]))


def test_partial_fractions_against_reciprocal(rng):
    pts = [complex(*rng.uniform(-1, 1, 2)) for _ in range(5)]
    p = ComplexPoly.from_roots([(z, 1) for z in pts], leading=1 + 0.5j)
    terms = partial_fractions(p)
    w = 3.0 * np.exp(2j * np.pi * np.arange(9) / 9)
    assert np.allclose(evaluate_partial_fractions(terms, w), 1 / p(w), rtol=1e-10, atol=0)
    assert abs(sum(t.coeff for t in terms)) < 1e-9


def test_partial_fractions_known_roots_with_multiplicity():
    known = [(0, 2), (1, 1)]
    p = ComplexPoly.from_roots(known)
    terms = partial_fractions(p, known_roots=known)
    by_key = {(round(t.root.real), t.order): t.coeff for t in terms}
    # 1/(w^2 (w-1)) = -1/w^2 - 1/w + 1/(w-1)
    assert abs(by_key[(0, 2)] + 1) < 1e-12
    assert abs(by_key[(0, 1)] + 1) < 1e-12
    assert abs(by_key[(1, 1)] - 1) < 1e-12


def test_partial_fractions_rejects_wrong_multiplicities():
    p = ComplexPoly.from_roots([(0, 2), (1, 1)])
    with pytest.raises(RootFindingError):
        partial_fractions(p, known_roots=[(0, 1), (1, 1)])


def test_residue_multiplicity_mismatch():
    p = ComplexPoly.from_roots([(0, 1), (1, 1)])
    with pytest.raises(ResidueError):
        residue(p, 0, 2)


def test_known_roots_with_misplaced_multiplicity():
    p = ComplexPoly.from_roots([(0, 2), (1, 1)])
    with pytest.raises(ResidueError):
        partial_fractions(p, known_roots=[(0, 1), (1, 2)])


def test_partial_fractions_on_clustered_roots():
    w = 2.0 * np.exp(2j * np.pi * np.arange(7) / 7 + 0.1)
    simple = [(0.3 + 0.2j, 1), (0.45 + 0.2j, 1), (0.3 + 0.35j, 1), (0.15 + 0.05j, 1), (0.45 + 0.35j, 1),
              (0.6 + 0.2j, 1), (-0.2, 1), (0.3 + 0.5j, 1)]
    repeated = [(0.3 + 0.2j, 2), (0.45 + 0.2j, 1), (0.3 + 0.35j, 3), (0.15 + 0.05j, 1), (-0.2, 1)]
    for points, known in ((simple, None), (repeated, repeated)):
        p = ComplexPoly.from_roots(points, leading=1.5 - 0.5j)
        exact = 1 / p(w)
        approx = evaluate_partial_fractions(partial_fractions(p, known_roots=known), w)
        assert np.max(np.abs(approx - exact) / np.maximum(1.0, np.abs(exact))) <= 1e-10


def test_residue_checks_every_lower_coefficient():
    p = ComplexPoly.from_roots([(0, 2), (1, 1)])
    assert abs(residue(p, 0, 2) + 1) < 1e-12
    with pytest.raises(ResidueError):
        residue(p, 0, 3)
    with pytest.raises(ResidueError):
        residue(p, 1, 2)


def test_residue_of_simple_root():
    p = ComplexPoly([-1, 0, 1])
    assert abs(residue(p, 1) - 0.5) < 1e-14
    assert abs(residue(p, -1) + 0.5) < 1e-14


def test_biseries_product_truncates():
    x, y = BiSeries.x(3), BiSeries.y(3)
    s = (x + y) ** 4
    assert s.low_order() is None
    t = (1 + y) * (1 - y)
    assert t.coefficient(0, 2) == -1
    assert t.coefficient(0, 1) == 0


def test_compose_and_inverse():
    order = 8
    y = BiSeries.y(order)
    x = BiSeries.x(order)
    f = y + y * y + x * y * y
    g = series_inverse_y(f)
    assert f.compose_y(g).allclose(y, 1e-12)


def test_compose_requires_vanishing_series():
    y = BiSeries.y(4)
    with pytest.raises(SeriesError):
        y.compose_y(y + 1)


def test_lie_exp_of_y_squared_is_geometric_series():
    order = 10
    y = BiSeries.y(order)
    phi = lie_exp(y * y)
    # time-one map of y^2 d/dy is y/(1-y)
    for j in range(1, order + 1):
        assert abs(phi.coefficient(0, j) - 1) < 1e-12


def test_divmod_y():
    order = 6
    x, y = BiSeries.x(order), BiSeries.y(order)
    divisor = y * (y - x)
    f = y ** 3 + x * y + 2
    q, r = f.divmod_y(divisor)
    assert (q * divisor + r).allclose(f, 1e-12)
    assert r.y_degree() < 2


def test_fixed_curve_set():
    curves = FixedCurveSet([(ComplexPoly([0], 'x'), 1), (ComplexPoly([0, 0, 1], 'x'), 1), (ComplexPoly([0, 1], 'x'), 1)])
    assert curves.total == 3
    assert curves.nu == 2
    assert curves.slopes() == [0j, 0j, 1 + 0j]
    assert abs(curves.product(0.1, 0.5) - 0.5 * (0.5 - 0.01) * 0.4) < 1e-14


def test_fixed_curves_must_be_distinct():
    with pytest.raises(SeriesError):
        FixedCurveSet([(ComplexPoly([0, 1], 'x'), 1), (ComplexPoly([0, 1], 'x'), 1)])
    with pytest.raises(SeriesError):
        FixedCurveSet([(ComplexPoly([0.1], 'x'), 2)])
