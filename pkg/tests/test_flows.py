import math

import numpy as np
import pytest

from unfold_dynamics.algebra import ComplexPoly
from unfold_dynamics.directions import build_aleph, direction_atlas
from unfold_dynamics.errors import OrbitError
from unfold_dynamics.flows import (ESCAPED, HOMOCLINIC, HOMOCLINIC_TOL, NONE, SINGULARITY, RegionLabel,
                                   _closest_approach, circle_tangencies, classify_point, detect_homoclinic, integrate,
                                   node_tangencies, portrait, separatrices, stability_sweep)
from unfold_dynamics.splitting import build_splitting


def test_integrate_linear_sink():
    traj = integrate(lambda w: -w, 1.0 + 1.0j, singularities=[0j], rtol=1e-10)
    assert traj.termination == SINGULARITY
    assert traj.limit == 0j
    # w(t) = w0 exp(-t)
    k = len(traj) // 2
    assert abs(traj.points[k] - (1 + 1j) * math.exp(-traj.times[k])) < 1e-7


def test_integrate_escapes():
    traj = integrate(lambda w: w * w, 0.5, escape_radius=10.0)
    assert traj.termination == ESCAPED
    assert abs(traj.end) >= 10.0


def test_integrate_refuses_singular_start():
    with pytest.raises(OrbitError):
        integrate(lambda w: w, 0j, singularities=[0j])


def test_separatrix_fan_directions():
    fan = separatrices(ComplexPoly([0, 0, 0, 1]), 1.0)
    assert len(fan.directions) == 4
    assert [d.tag for d in fan.directions] == ['outbound', 'inbound', 'outbound', 'inbound']
    for d in fan.directions:
        assert d.trajectory.termination == SINGULARITY


def test_homoclinic_on_unstable_direction():
    p = ComplexPoly([-1, 0, 1])
    # residues of 1/p are +-1/2; mu = i puts 2 pi i r / mu on the real axis
    assert detect_homoclinic(p, 1j).outcome == HOMOCLINIC
    assert detect_homoclinic(p, np.exp(0.3j)).outcome == NONE


def test_stability_sweep_agrees_with_homoclinic_search():
    rows = stability_sweep(ComplexPoly([-1, 0, 1]), n_mu=8)
    assert len(rows) == 8
    for angle, stable, outcome in rows:
        if stable:
            assert outcome != HOMOCLINIC


def test_portrait_collects_trajectories():
    result = portrait(ComplexPoly([0, -1, 0, 1]), np.exp(0.2j), grid=3, max_steps=2000)
    names = [name for name, _ in result.trajectories]
    assert sum(n.startswith('separatrix') for n in names) == 4
    assert any(n.startswith('seed') for n in names)
    assert len(result.singular) == 3


def test_circle_tangencies_monomial():
    # Re(mu w^3) on |w| = 1: 2 nu = 4 tangencies, all convex
    for mu in (1.0, np.exp(0.7j)):
        ts = circle_tangencies(lambda w: mu * w ** 3, 1.0)
        assert len(ts) == 4
        assert ts.all_convex
        gaps = np.diff(ts.angles())
        assert np.allclose(gaps, math.pi / 2, atol=1e-8)


def test_circle_tangencies_of_radial_field():
    # w d/dw is transverse to every circle
    assert len(circle_tangencies(lambda w: w, 1.0)) == 0


def test_node_tangencies_on_example(example_problem):
    tree = build_splitting(example_problem.field, example_problem.radii)
    root = tree.root
    ts = node_tangencies(root, np.exp(0.4j), 1e-5, 0.4)
    assert len(ts) == 2 * root.nu
    assert ts.all_convex
    c0 = tree.find('C_0')
    ts = node_tangencies(c0, np.exp(0.4j), 1e-5j)
    assert len(ts) == 2 * c0.nu


def test_closest_approach_of_a_polygon():
    dist, i = _closest_approach(np.array([1 + 1j, -1 + 1j]))
    assert dist == pytest.approx(1.0)
    assert i == 0
    dist, i = _closest_approach(np.array([2.0, 1.0, -1 + 0.5j]))
    assert dist == pytest.approx(0.5 / math.sqrt(4.25))
    assert i == 1


def test_homoclinic_witness_returns_to_infinity():
    p = ComplexPoly([-1, 0, 1])
    result = detect_homoclinic(p, 1j)
    assert result.found
    assert result.details['closest_approach'] < HOMOCLINIC_TOL
    assert result.witness.termination == ESCAPED
    assert abs(result.witness.points[0]) > 1.0
    assert abs(result.witness.points[-1]) > 1.0


def test_classify_point_on_a_flow(flow_problem):
    tree = build_splitting(flow_problem.field, flow_problem.radii)
    aleph = build_aleph(direction_atlas(tree), None, 1.0, 0)
    # Re(i y^2 d/dy) moves -1/y parallel to the imaginary axis
    assert classify_point(aleph, tree, (0.01, 0.1)) == RegionLabel('gamma_0', 'gamma_0')
    assert classify_point(aleph, tree, (0.01, 0.45j)) == RegionLabel('exterior', 'gamma_0')
    with pytest.raises(OrbitError):
        classify_point(aleph, tree, (0.01, 1e-9))
