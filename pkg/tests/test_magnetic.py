import numpy as np
import pytest
from scipy.integrate import solve_ivp

from mflab import (ChartExit, MissingPrimitive, NoConvergence, action, find_closed_orbit, integrate, lorentz_force,
                   systems)
from mflab.coeffs import IndexedTerm, TrigTerm
from mflab.finsler import Geometry, geodesic_coefficients_christoffel
from mflab.identities import build_grid
from mflab.integrators import dopri5
from mflab.magnetic import ClosedOrbit, Flow
from mflab.specs import MagneticSystem, MetricSpec, Point, TangentVector

from conftest import random_sm

SPECS = {
    "euclidean": systems.euclidean_plane(1.0),
    "flat_torus": systems.flat_torus(1.0),
    "riemannian": systems.riemannian_torus(1.0),
    "randers": systems.randers_torus(1.0),
    "disk": systems.poincare_disk(0.5),
}


def circle_start():
    return TangentVector(Point([0.0, 0.0]), [1.0, 0.0])


# Lorentz force ---------------------------------------------------------------------


def test_no_field_no_force():
    sys = systems.randers_torus(0.0)
    x, y = random_sm(sys, 20)
    lf = lorentz_force(sys, x, y)
    assert np.abs(lf.Y).max() == 0.0


@pytest.mark.parametrize("b", [1.0, 2.5, -0.7])
def test_plane_force_is_rotation(b):
    sys = systems.euclidean_plane(b)
    x, y = random_sm(sys, 20)
    Yy = np.einsum("pij,pj->pi", lorentz_force(sys, x, y).Y, y)
    assert np.allclose(Yy, b * np.stack([-y[:, 1], y[:, 0]], -1), atol=1e-15)


@pytest.mark.parametrize("name", ["randers", "riemannian", "disk"])
def test_force_is_skew_and_its_fiber_derivative(name):
    sys = SPECS[name]
    x, y = random_sm(sys, 1000, seed=1)
    rng = np.random.default_rng(2)
    U, V = rng.normal(size=(2, 1000, 2))
    geo = Geometry(sys, x, y, 3)
    g, Y = geo.g.value, geo.Y.value
    skew = np.einsum("pij,pik,pk,pj->p", g, Y, U, V) + np.einsum("pij,pi,pjk,pk->p", g, U, Y, V)
    assert np.abs(skew).max() <= 1e-10
    lf = lorentz_force(sys, x, y)
    ref = -2 * np.einsum("pmj,pil,plmk->pijk", Y, geo.ginv.value, geo.C.value)
    assert np.abs(lf.Y_vertical - ref).max() <= 1e-8


def test_closedness_and_primitive():
    for sys in (systems.euclidean_plane(1.0), systems.poincare_disk(0.5), systems.randers_torus(1.0)):
        x, _ = random_sm(sys, 200)
        err, perr = sys.check_closed(x)
        assert err <= 1e-9 and perr <= 1e-9


# integration -----------------------------------------------------------------------


def test_unit_field_circle():
    tr = integrate(SPECS["euclidean"], circle_start(), 2 * np.pi, tol=1e-10, t_eval=np.linspace(0, 2 * np.pi, 65))
    t = tr.t
    assert np.abs(tr.x - np.stack([np.sin(t), 1 - np.cos(t)], -1)).max() <= 1e-8
    assert np.abs(tr.y - np.stack([np.cos(t), np.sin(t)], -1)).max() <= 1e-8
    rows = tr.to_csv_rows()
    assert rows.shape == (65, 5)


def test_straight_line_without_field():
    sys = systems.euclidean_plane(0.0)
    y0 = np.array([0.6, 0.8])
    tr = integrate(sys, TangentVector(Point([1.0, -2.0]), y0), 7.0, t_eval=[0.0, 3.0, 7.0])
    assert np.allclose(tr.x, np.array([1.0, -2.0]) + tr.t[:, None] * y0, atol=1e-12)


@pytest.mark.parametrize("name", sorted(SPECS))
def test_energy_is_conserved(name):
    sys = SPECS[name]
    x, y = random_sm(sys, 2, seed=3, radius=0.2)
    for z in np.concatenate([x, y], axis=1):
        tr = integrate(sys, z, 20.0, tol=1e-10)
        assert tr.stats["F_drift"] <= 1e-8
    # and without projection the drift still stays small per 10 time units
    tr = integrate(sys, np.concatenate([x[0], y[0]]), 10.0, tol=1e-10, project=False)
    assert tr.stats["F_drift"] <= 1e-8


def test_disk_orbit_stays_on_SM():
    tr = integrate(SPECS["disk"], TangentVector(Point([0.0, 0.0]), [0.5, 0.0]), 20.0, tol=1e-10)
    assert tr.stats["F_drift"] <= 1e-8


def test_disk_geodesic_leaves_chart():
    with pytest.raises(ChartExit):
        integrate(systems.poincare_disk(0.0), TangentVector(Point([0.0, 0.0]), [0.5, 0.0]), 200.0)


def test_tolerance_range():
    with pytest.raises(ValueError):
        integrate(SPECS["euclidean"], circle_start(), 1.0, tol=1e-3)


def test_zero_field_matches_geodesic_integrator():
    """Cross-check against a plain geodesic ODE solved by scipy with the Christoffel-route spray."""
    sys = systems.randers_torus(0.0)
    m = sys.metric
    x, y = random_sm(sys, 2, seed=4)
    for z0 in np.concatenate([x, y], axis=1):
        def rhs(t, z):
            G = geodesic_coefficients_christoffel(m, z[None, :2], z[None, 2:])[0]
            return np.concatenate([z[2:], -2 * G])

        ref = solve_ivp(rhs, (0, 5.0), z0, method="DOP853", rtol=1e-13, atol=1e-13, t_eval=[5.0])
        tr = integrate(sys, z0, 5.0, tol=1e-12, t_eval=[5.0])
        assert np.abs(tr.states()[-1] - ref.y[:, -1]).max() <= 1e-9


def test_reversed_circle_is_not_magnetic():
    sys = SPECS["euclidean"]
    tr = integrate(sys, circle_start(), 2 * np.pi, t_eval=np.linspace(0, 2 * np.pi, 33))
    flow = Flow(sys)
    acc = flow.rhs(tr.states())[:, 2:]
    # the reversed curve has velocity -y and the same acceleration
    rev = np.concatenate([tr.x, -tr.y], axis=1)
    predicted = flow.rhs(rev)[:, 2:]
    assert np.linalg.norm(acc - predicted, axis=1).min() >= 0.1


@pytest.mark.parametrize("sys,N,tol", [(systems.flat_torus(0.0), 16, 1e-12),
                                       (systems.riemannian_torus(1.0), 24, 1e-7)], ids=["flat", "curved_field"])
def test_liouville_measure_is_flow_invariant(sys, N, tol):
    grid = build_grid(sys, N, N)
    flow = Flow(sys)
    M = grid.size
    z0 = np.concatenate([grid.x, grid.y], axis=1)

    def f(t, s):
        return flow.rhs(s.reshape(M, 4)).ravel()

    # the whole grid is pushed forward as one batched state
    _, zs, _ = dopri5(f, 0.0, z0.ravel(), 1.0, 1e-11, t_eval=[1.0])
    z1 = zs[-1].reshape(M, 4)

    def test_fn(z):
        return (1 + 0.5 * np.cos(z[:, 0])) * z[:, 2] ** 2 + np.sin(z[:, 1]) * z[:, 3] + np.cos(z[:, 0] - z[:, 1])

    before = grid.integrate(test_fn(z0))
    after = grid.integrate(test_fn(z1))
    assert abs(after - before) <= tol * abs(before)


# closed orbits and action ---------------------------------------------------------------


@pytest.fixture(scope="module")
def circle_orbit():
    return find_closed_orbit(SPECS["euclidean"], circle_start(), 6.0)


def test_circle_is_found_as_closed_orbit(circle_orbit):
    orb = circle_orbit
    assert orb.T == pytest.approx(2 * np.pi, abs=1e-8)
    assert orb.closure_residual <= 1e-8
    d = orb.to_json()
    assert set(d) == {"initial", "T", "residual", "action"}


def test_flat_torus_translation_orbit():
    orb = find_closed_orbit(systems.flat_torus(0.0), TangentVector(Point([0.5, 1.0]), [1.0, 0.0]), 6.0)
    assert orb.T == pytest.approx(2 * np.pi, abs=1e-8)
    assert np.allclose(orb.lattice_shift, [2 * np.pi, 0.0])


def test_no_closed_geodesic_in_the_plane():
    with pytest.raises(NoConvergence):
        find_closed_orbit(systems.euclidean_plane(0.0), TangentVector(Point([0.0, 0.0]), [0.6, 0.8]), 6.0)


def test_action_of_circle(circle_orbit):
    assert action(SPECS["euclidean"], circle_orbit) == pytest.approx(np.pi, abs=1e-6)


def test_action_without_field_is_length():
    sys = MagneticSystem(MetricSpec.flat_torus(2), primitive_terms=())
    orb = find_closed_orbit(sys, TangentVector(Point([0.5, 1.0]), [1.0, 0.0]), 6.0)
    assert action(sys, orb) == pytest.approx(orb.T, abs=1e-9)


def test_action_is_gauge_invariant():
    om, prim = systems.unit_form(1.0, True)
    # beta + df for f = 0.7 cos(x1 + x2)
    df = (IndexedTerm((0,), TrigTerm((1, 1), 0.0, -0.7)), IndexedTerm((1,), TrigTerm((1, 1), 0.0, -0.7)))
    sys = MagneticSystem(MetricSpec.euclidean(2), om, primitive_terms=prim)
    sys2 = MagneticSystem(MetricSpec.euclidean(2), om, primitive_terms=prim + df)
    x, _ = random_sm(sys2, 50)
    assert sys2.check_closed(x)[1] <= 1e-9
    orb = find_closed_orbit(sys, TangentVector(Point([0.3, -1.0]), [0.6, 0.8]), 6.0)
    assert action(sys2, orb) == pytest.approx(action(sys, orb), abs=1e-9)


def test_action_requires_primitive():
    sys = systems.randers_torus(1.0)
    orb = ClosedOrbit(TangentVector(Point([0.0, 0.0]), [1.0, 0.0]), 1.0, 0.0)
    with pytest.raises(MissingPrimitive):
        action(sys, orb)
