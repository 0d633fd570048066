import pytest

from unfold_dynamics.algebra import BiSeries, ComplexPoly, FixedCurveSet
from unfold_dynamics.errors import LocateError, SplittingError
from unfold_dynamics.splitting import (COMPACT_LIKE, EXTERIOR, SEED, Radii, VectorFieldUnfolding, build_splitting,
                                       polynomial_field)


def test_example_tree_labels_and_levels(example_problem):
    tree = build_splitting(example_problem.field, example_problem.radii)
    nodes = {n.label: n for n in tree.nodes()}
    assert set(nodes) == {'E_0', 'C_0', 'E_00', 'E_01', 'C_00', 'E_000', 'E_001'}
    assert (nodes['E_0'].e, nodes['E_0'].iota) == (0, 2)
    assert (nodes['C_0'].e, nodes['E_00'].iota, nodes['E_01'].e) == (2, 3, 2)
    assert nodes['C_00'].e == 3
    assert nodes['C_0'].kind == COMPACT_LIKE
    assert nodes['E_00'].kind == EXTERIOR
    assert nodes['E_01'].kind == SEED
    assert nodes['E_01'].terminal
    assert [n.label for n in tree.compact_nodes] == ['C_0', 'C_00']


def test_compact_polynomial_fields(example_problem):
    tree = build_splitting(example_problem.field)
    assert tree.find('C_0').poly_field.allclose(ComplexPoly([0, 0, -1, 1]), 1e-14)
    assert tree.find('C_00').poly_field.allclose(ComplexPoly([0, 1, -1]), 1e-14)
    # lambda^e scaling
    scaled = polynomial_field(tree.find('C_0'), 1j)
    assert scaled.allclose(ComplexPoly([0, 0, 1, -1]), 1e-14)


def test_polynomial_field_needs_compact_node(example_problem):
    tree = build_splitting(example_problem.field)
    with pytest.raises(SplittingError):
        polynomial_field(tree.root)


def test_adapted_coordinates_round_trip(example_problem):
    tree = build_splitting(example_problem.field)
    node = tree.find('E_001')
    x, y = 0.01 + 0.002j, 0.0003
    t = node.to_adapted(x, y)
    assert abs(node.from_adapted(x, t) - y) < 1e-16


def test_locate(example_problem):
    tree = build_splitting(example_problem.field, example_problem.radii)
    x = 0.01
    assert tree.locate(x, 0.3).node.label == 'E_0'
    # w = y/x = 0.5 sits between the slopes 0 and 1
    loc = tree.locate(x, 0.5 * x)
    assert loc.node.label == 'C_0'
    assert abs(loc.coordinate - 0.5) < 1e-12
    # close to the curve y = x
    assert tree.locate(x, x * (1 + 0.01)).node.label == 'E_01'
    # at x = 0 everything is exterior
    assert tree.locate(0, 0.2).node.label == 'E_0'


def test_locate_outside_domain(example_problem):
    tree = build_splitting(example_problem.field, example_problem.radii)
    with pytest.raises(LocateError):
        tree.locate(1.0, 0.1)
    with pytest.raises(LocateError):
        tree.locate(0.01, 2.0)


def test_unit_vanishing_in_domain_is_rejected():
    curves = FixedCurveSet([(ComplexPoly([0], 'x'), 2)])
    # u = 1 - 4y vanishes at y = 0.25 < epsilon
    unit = BiSeries.from_terms({(0, 0): 1, (0, 1): -4})
    with pytest.raises(SplittingError):
        build_splitting(VectorFieldUnfolding(unit, curves), Radii(epsilon=0.5))


def test_reduced_field_defined_at_zero(example_problem):
    tree = build_splitting(example_problem.field)
    c0 = tree.find('C_0')
    # x^e replaced by lambda^e: finite at x = 0
    assert abs(c0.field.reduced(1.0, 0.0, 2.0) - 4.0) < 1e-14
