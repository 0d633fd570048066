import math

import numpy as np
import pytest

from unfold_dynamics.algebra import BiSeries, ComplexPoly, FixedCurveSet
from unfold_dynamics.errors import OrbitError, SeriesError
from unfold_dynamics.fatou import (DEFAULT_K, FatouEvaluator, SectorRegion, delta, fatou_orbit, infinitesimal_generator,
                                   k_normal_form, lavaurs_sample, normal_form_order, petal_anchors, petal_points,
                                   roundoff_floor, tail_bound, tail_constant)
from unfold_dynamics.maps import SeriesMap, TimeForm


def test_petals_of_y_squared(flow_problem):
    petals = petal_anchors(flow_problem.field, 0, 0.5)
    assert [p.j for p in petals] == [0, 1]
    assert petals[0].angle == pytest.approx(0.0)
    assert petals[0].s == -1 and not petals[0].attracting
    assert petals[1].angle == pytest.approx(math.pi)
    assert petals[1].attracting
    assert petals[1].anchor == pytest.approx(-0.5)


def test_petals_persist_for_small_x(example_problem):
    base = petal_anchors(example_problem.field, 0, 0.5)
    moved = petal_anchors(example_problem.field, 0.01, 0.5)
    assert len(base) == len(moved) == 4
    assert [p.s for p in moved] == [p.s for p in base]
    # orientations alternate around the circle
    assert all(a.s != b.s for a, b in zip(moved, moved[1:]))


def test_petal_points_stay_inside_the_disk(flow_problem):
    petal = petal_anchors(flow_problem.field, 0, 0.5)[1]
    pts = petal_points(petal, 0.5, 1, 5)
    assert np.all(np.abs(pts) >= 0.125 - 1e-15)
    assert np.all(np.abs(pts) <= 0.3 + 1e-15)
    assert np.all(np.abs(np.angle(-pts)) <= math.pi / 8 + 1e-12)


def test_flow_normal_form_is_the_field(flow_problem):
    phi = flow_problem.unfolding_map()
    assert k_normal_form(phi) is flow_problem.field


def test_generator_of_a_time_one_map(flow_problem):
    phi = flow_problem.unfolding_map()
    g = infinitesimal_generator(phi)
    assert np.max(np.abs((g - flow_problem.field.series(g.order)).coeffs)) < 1e-10


def test_normal_form_of_perturbed_map(perturbed_problem):
    phi = perturbed_problem.unfolding_map()
    field = k_normal_form(phi, 2)
    assert field.unit.coefficient(0, 0) == pytest.approx(1.0, abs=1e-10)
    assert field.unit.coefficient(1, 0) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(SeriesError):
        k_normal_form(phi, 0)
    with pytest.raises(SeriesError):
        k_normal_form(phi, 6, order=5)


def test_generator_of_a_map_that_is_not_a_flow():
    curves = FixedCurveSet([(ComplexPoly([0], 'x'), 2)])
    f = SeriesMap(BiSeries.from_terms({(0, 1): 1, (0, 2): 1, (0, 3): 0.5}, 12), curves)
    g = infinitesimal_generator(f, 12)
    assert g.coefficient(0, 2) == pytest.approx(1.0, abs=1e-12)
    # exp(y^2 d/dy)(y) has y^3 coefficient 1, so G must carry -1/2
    assert g.coefficient(0, 3) == pytest.approx(-0.5, abs=1e-12)
    field = k_normal_form(f, 2)
    assert field.unit.coefficient(0, 0) == pytest.approx(1.0, abs=1e-10)
    assert field.unit.coefficient(0, 1) == pytest.approx(-0.5, abs=1e-10)


def test_generator_of_perturbed_map(perturbed_problem):
    phi = perturbed_problem.unfolding_map()
    g = infinitesimal_generator(phi)
    field = perturbed_problem.field
    # the cofactor only enters at total degree 4 and above
    assert g.coefficient(0, 2) == pytest.approx(field.unit.coefficient(0, 0), abs=1e-12)
    assert g.coefficient(1, 2) == pytest.approx(field.unit.coefficient(1, 0), abs=1e-12)


@pytest.mark.parametrize('j', [0, 1])
def test_fatou_coordinate_of_y_squared(flow_problem, j):
    phi = flow_problem.unfolding_map()
    ev = FatouEvaluator(phi, j, 0, epsilon=0.5)
    y = petal_points(ev.petal, 0.5, 1, 6)
    psi = ev(y)
    # psi = -1/y + 1/anchor for the time-one map of y^2 d/dy
    assert np.max(np.abs(psi + 1 / y - 1 / ev.petal.anchor)) < 1e-8


def test_abel_equation_on_attracting_petal(flow_problem):
    phi = flow_problem.unfolding_map()
    ev = FatouEvaluator(phi, 1, 0, epsilon=0.5)
    y = petal_points(ev.petal, 0.5, 1, 4)
    assert np.max(ev.abel_residual(y)) < 1e-9
    value = ev.evaluate(y)
    assert np.all(value.residual <= 1e-10)
    assert np.all(value.steps >= 2)


def test_orbit_leaving_the_petal_is_an_error(flow_problem):
    phi = flow_problem.unfolding_map()
    ev = FatouEvaluator(phi, 1, 0, epsilon=0.5)
    with pytest.raises(OrbitError):
        ev(0.3)
    with pytest.raises(OrbitError):
        ev(0.6)


def test_lavaurs_field_of_a_flow_is_the_field(flow_problem):
    phi = flow_problem.unfolding_map()
    ev = FatouEvaluator(phi, 1, 0, epsilon=0.5)
    y = np.array([-0.2, -0.15 + 0.02j])
    sample = lavaurs_sample(ev, y)
    assert np.max(np.abs(sample.g - y ** 2)) < 1e-6
    assert np.all(sample.error < 1e-5)


def test_sector_region():
    W = SectorRegion(math.pi / 4, 1.0)
    assert W.contains(1.0)
    assert W.contains(-1 + 3j)
    assert not W.contains(-1 + 0.5j)
    assert W.absorbs([1, 2, 3], [0.01, 0.01]) is True
    assert W.absorbs([-1 + 0.5j, 1], [0.01]) is None
    assert W.absorbs([1, 2], [0.5]) is None
    assert W.absorbs([1, -3 + 0.1j], [0.01]) is False


def test_tail_bound_decreases_along_the_orbit():
    psi = np.array([1.0, 10.0, 100.0])
    bounds = tail_bound(6, 1.0, psi)
    assert np.all(np.diff(bounds) < 0)
    assert np.all(bounds > 0)


def test_fatou_orbit_single_point(flow_problem):
    phi = flow_problem.unfolding_map()
    psi, residual = fatou_orbit(phi, 1, 0, -0.2 + 0.01j)
    # anchor at -0.5 on the attracting petal
    assert abs(psi - (-1 / (-0.2 + 0.01j) - 2.0)) < 1e-8
    assert residual < 1e-10


def test_tail_constant_follows_the_sector_angle():
    assert tail_constant(math.pi / 2) == pytest.approx(math.sqrt(2) / 2)
    assert tail_constant(math.pi) == pytest.approx(1.0)
    assert tail_constant(math.pi / 3) < tail_constant(math.pi / 2)
    psi = np.array([5.0, 50.0])
    assert np.allclose(tail_bound(6, 1.0, psi), tail_bound(6, 1.0, psi, tail_constant(math.pi / 2)))
    # a narrower sector weakens the bound
    assert np.all(tail_bound(6, 1.0, psi, tail_constant(math.pi / 3)) > tail_bound(6, 1.0, psi))


def test_roundoff_floor_grows_with_psi():
    assert roundoff_floor(0.0) > 0
    assert roundoff_floor(100.0) == pytest.approx(101 * roundoff_floor(0.0))


def test_normal_form_order_scales_with_nu():
    assert normal_form_order(1) == DEFAULT_K
    assert normal_form_order(2) == 8
    assert normal_form_order(3) == 12
    assert normal_form_order(2, 3) == 3


def test_evaluator_picks_k_from_nu(example_problem, perturbed_problem):
    assert example_problem.curves.nu == 2
    ev = FatouEvaluator(example_problem.unfolding_map(), 0, 0, epsilon=0.5)
    assert ev.k == 8
    ev = FatouEvaluator(perturbed_problem.unfolding_map(), 0, 0, epsilon=0.25, k=4)
    assert ev.k == 4


def test_delta_vanishes_to_order_k_on_the_fixed_curves(perturbed_problem):
    phi = perturbed_problem.unfolding_map()
    k = 2
    form = TimeForm(k_normal_form(phi, k), 0)
    y = -0.1 * 0.7 ** np.arange(8)
    d = np.abs(delta(phi, form, y))
    F = np.abs(phi.curves.product_series(phi.order)(0, y))
    ratios = d / F ** k
    assert np.all(np.isfinite(ratios))
    assert np.max(ratios) <= 2 * np.max(ratios[:2])
    assert d[-1] < 1e-3 * d[0]


def test_reported_residual_bounds_the_error(perturbed_problem):
    phi = perturbed_problem.unfolding_map()
    petal = next(p for p in petal_anchors(k_normal_form(phi), 0.01, 0.25) if p.attracting)
    loose = FatouEvaluator(phi, petal.j, 0.01, epsilon=0.25, tol=1e-6)
    tight = FatouEvaluator(phi, petal.j, 0.01, epsilon=0.25, tol=1e-12)
    y = petal_points(loose.petal, 0.25, 1, 100)
    a, b = loose.evaluate(y), tight.evaluate(y)
    assert np.all(b.steps >= a.steps)
    assert np.all(np.abs(a.psi - b.psi) <= a.residual + b.residual)
