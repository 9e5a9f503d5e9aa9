import numpy as np
import pytest
from scipy.integrate import quad

from mflab import HypothesisUnverified, UnsupportedChart, systems
from mflab.coeffs import IndexedTerm, TrigTerm
from mflab.finsler import Geometry
from mflab.identities import (DICTIONARY_TERMS, INTEGRAL_TERMS, PESTOV_TERMS, build_grid, gauss_ostrogradskii,
                              int_nabla_checks, integral_identity_2d, integral_identity_nd, menqc_functional,
                              pestov_nd_pointwise, term_dictionary, xnabla_pointwise)
from mflab.semibasic import Const, SemibasicVectorField, linear, pullback
from mflab.specs import MagneticSystem
from mflab.surface import Frame2D

from conftest import orthogonal_metric, random_sm

RANDERS = systems.randers_torus(1.0)
RIEM = systems.riemannian_torus(0.8)
CURVED = MagneticSystem(orthogonal_metric(), area_form=1.0, strength=0.6)


@pytest.fixture(scope="module")
def randers_grid():
    return build_grid(RANDERS, 24, 24)


# quadrature grid --------------------------------------------------------------------


def test_flat_torus_measure():
    g = build_grid(systems.flat_torus(0.0), 8, 8)
    assert g.volume == pytest.approx((2 * np.pi) ** 3, rel=1e-12)
    assert np.all(g.weights > 0)
    assert g.size == 8 * 8 * 8


def test_riemannian_measure_is_area_times_angle():
    m = systems.riemannian_torus_metric()
    area = 2 * np.pi * quad(lambda s: np.sqrt(1 + 0.5 * np.cos(s)), 0, 2 * np.pi, epsabs=1e-14)[0]
    g = build_grid(MagneticSystem(m), 24, 48)
    assert g.volume == pytest.approx(2 * np.pi * area, abs=1e-10)


def test_randers_measure_is_stable_under_fiber_refinement():
    v32 = build_grid(RANDERS, 16, 32).volume
    v64 = build_grid(RANDERS, 16, 64).volume
    assert v64 > 0
    assert abs(v64 - v32) <= 1e-8 * v64


def test_weights_match_frame_density():
    g = build_grid(RANDERS, 6, 12)
    fr = Frame2D(Geometry(RANDERS, g.x, g.y, 4))
    dx_dth = (2 * np.pi / 6) ** 2 * (2 * np.pi / 12)
    assert np.allclose(g.weights / dx_dth, fr.liouville_density(), rtol=1e-12)


def test_grid_needs_a_torus():
    with pytest.raises(UnsupportedChart):
        build_grid(systems.poincare_disk(0.5), 8, 8)
    with pytest.raises(UnsupportedChart):
        build_grid(systems.euclidean_plane(1.0), 8, 8)


# pointwise identities ------------------------------------------------------------


def test_pestov_nd_constant_has_zero_terms():
    x, y = random_sm(RANDERS, 50)
    rep = pestov_nd_pointwise(RANDERS, Const(1.0), x, y)
    assert rep.residual == 0.0
    assert set(rep.terms) == set(PESTOV_TERMS)
    assert all(np.abs(v).max() == 0.0 for v in rep.terms.values())


@pytest.mark.parametrize("sys", [RANDERS, RIEM, systems.poincare_disk(0.5)], ids=["randers", "riem", "disk"])
def test_pestov_nd_at_random_points(sys):
    x, y = random_sm(sys, 1000, seed=1)
    rep = pestov_nd_pointwise(sys, systems.sample_field(), x, y)
    assert rep.residual <= 1e-7
    assert np.abs(rep.lhs).max() > 1e-2


def test_xnabla_examples():
    sys = systems.riemannian_torus(0.0)
    x, y = random_sm(sys, 500)
    f = pullback(TrigTerm((1, 0), 1.0), TrigTerm((0, 1), 0.0, 0.4))
    rep = xnabla_pointwise(sys, f, x, y)
    assert rep.residual <= 1e-8
    assert np.abs(rep.lhs).max() == 0.0  # grad_v of a pullback vanishes
    assert xnabla_pointwise(RANDERS, Const(2.0), x, y).residual == 0.0
    x, y = random_sm(RANDERS, 1000, seed=2)
    assert xnabla_pointwise(RANDERS, systems.sample_field(), x, y).residual <= 1e-7


# divergence formulas and fiber-linear integrands ----------------------------------


def test_divergence_formulas_for_position_field(randers_grid):
    U = SemibasicVectorField.position(RANDERS)
    rv, rh = gauss_ostrogradskii(RANDERS, U, randers_grid)
    assert rv.lhs == pytest.approx(2 * randers_grid.volume, rel=1e-12)
    assert rv.residual <= 1e-9
    assert abs(rh.lhs) <= 1e-9 and rh.residual <= 1e-9


def test_divergence_formulas_for_vertical_gradient(randers_grid):
    # grad_v u of a degree-0 u has degree -1
    U = SemibasicVectorField.vertical_gradient(RANDERS, systems.sample_field())
    assert U.degree == -1
    rv, rh = gauss_ostrogradskii(RANDERS, U, randers_grid)
    assert rv.residual <= 1e-6 and rh.residual <= 1e-6
    assert abs(rv.terms["mean_cartan"]) > 1e-3


def test_int_nabla_examples(randers_grid):
    flat = systems.flat_torus(0.0)
    grid = build_grid(flat, 8, 8)
    r1, _ = int_nabla_checks(flat, Const(0.0), linear((0, TrigTerm((0, 0), 1.0))), grid)
    assert abs(r1.lhs) <= 1e-10
    _, r2 = int_nabla_checks(flat, Const(1.0), linear(), grid)
    assert r2.lhs == pytest.approx(grid.volume, rel=1e-12)
    h = pullback(TrigTerm((1, 0), 1.0))
    th = linear((1, TrigTerm((0, 0), 0.3)))
    r1, r2 = int_nabla_checks(RANDERS, h, th, randers_grid)
    assert r1.residual <= 1e-6 and r2.residual <= 1e-6


# integral identities -----------------------------------------------------------


def test_integral_identities_constant(randers_grid):
    assert integral_identity_2d(RANDERS, Const(1.0), randers_grid).residual == 0.0
    assert integral_identity_nd(RANDERS, Const(1.0), randers_grid).residual == 0.0


def test_integral_identity_nd_terms(randers_grid):
    rep = integral_identity_nd(RANDERS, systems.sample_field(), randers_grid)
    assert set(INTEGRAL_TERMS) <= set(rep.terms)
    assert rep.residual <= 1e-4  # quadrature-limited at 24; the 48 grid is in the acceptance suite
    assert abs(rep.terms["L"]) > 1e-2


def test_printed_landsberg_sign_fails_only_where_L_is_nonzero(randers_grid):
    u = systems.sample_field()
    good = integral_identity_nd(RANDERS, u, randers_grid)
    printed = integral_identity_nd(RANDERS, u, randers_grid, l_sign=1.0)
    assert printed.residual == pytest.approx(2 * abs(good.terms["L"]), rel=1e-3)
    assert printed.residual > 0.05
    grid = build_grid(RIEM, 16, 16)
    a = integral_identity_nd(RIEM, u, grid)
    b = integral_identity_nd(RIEM, u, grid, l_sign=1.0)
    assert a.residual == b.residual


@pytest.mark.parametrize("sys", [RIEM, systems.riemannian_torus(0.0), CURVED], ids=["field", "nofield", "curved"])
def test_2d_and_nd_identities_agree_side_by_side(sys):
    grid = build_grid(sys, 24, 24)
    u = systems.sample_field()
    a = integral_identity_2d(sys, u, grid)
    b = integral_identity_nd(sys, u, grid)
    assert a.residual <= 1e-4
    assert abs(a.lhs - b.lhs) <= 1e-10 * abs(a.lhs)
    assert abs(a.rhs - b.rhs) <= 1e-10 * abs(a.rhs)


def test_2d_identity_needs_a_surface():
    from mflab.specs import MetricSpec

    sys3 = MagneticSystem(MetricSpec.flat_torus(3))
    with pytest.raises(ValueError):
        integral_identity_2d(sys3, Const(1.0), build_grid(sys3, 4, 4))


def test_three_dimensional_identity():
    from mflab.semibasic import Homog0, Linear
    from mflab.specs import MetricSpec

    sys3 = MagneticSystem(MetricSpec.flat_torus(3), (IndexedTerm((0, 1), TrigTerm((0, 0, 0), 0.5)),))
    u3 = Homog0(Linear((IndexedTerm((0,), TrigTerm((0, 1, 0), 1.0)), IndexedTerm((2,), TrigTerm((1, 0, 0), 0.6)))))
    rep = integral_identity_nd(sys3, u3, build_grid(sys3, 6, 4))
    assert rep.residual <= 1e-8 * max(1.0, abs(rep.lhs))
    rng = np.random.default_rng(5)
    x = rng.uniform(0, 2 * np.pi, (200, 3))
    y = rng.normal(size=(200, 3))
    y /= np.linalg.norm(y, axis=1, keepdims=True)
    assert pestov_nd_pointwise(sys3, u3, x, y).residual <= 1e-7


# the functional built from the identity ----------------------------------------


def df_theta(coef):
    """theta = df for f = coef * cos x1."""
    return linear((0, TrigTerm((1, 0), 0.0, -coef)))


def test_menqc_for_pullbacks():
    grid = build_grid(systems.riemannian_torus(0.0), 12, 12)
    sys = systems.riemannian_torus(0.0)
    f = pullback(TrigTerm((1, 0), 1.0))
    v = menqc_functional(sys, f, grid, theta=df_theta(1.0))
    assert abs(v) <= 1e-6
    shifted = pullback(TrigTerm((1, 0), 1.0), TrigTerm((0, 0), 2.5))
    assert menqc_functional(sys, shifted, grid, theta=df_theta(1.0)) == v


def test_menqc_checks_its_hypothesis():
    sys = systems.riemannian_torus(0.0)
    grid = build_grid(sys, 8, 8)
    with pytest.raises(HypothesisUnverified):
        menqc_functional(sys, pullback(TrigTerm((1, 0), 1.0)), grid)
    with pytest.raises(HypothesisUnverified):
        menqc_functional(sys, systems.sample_field(), grid, theta=df_theta(1.0))


# 2D <-> n-D dictionary ----------------------------------------------------------


@pytest.mark.parametrize("sys", [RIEM, systems.riemannian_torus(0.0), CURVED], ids=["field", "nofield", "curved"])
def test_term_dictionary(sys):
    x, y = random_sm(sys, 500, seed=3)
    d = term_dictionary(sys, systems.sample_field(), x, y)
    assert set(d) == set(DICTIONARY_TERMS)
    for k, (nd, two) in d.items():
        assert np.abs(nd - two).max() <= 1e-6, k
