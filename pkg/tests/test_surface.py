import numpy as np
import pytest

from mflab import FramePoint2D, frame, magnetic_frame_quantities, pestov_2d, systems
from mflab.coeffs import IndexedTerm, TrigTerm
from mflab.finsler import Geometry
from mflab.semibasic import Const, Homog0, Linear, Product, pullback, raise_index, vert
from mflab.specs import MagneticSystem, MetricSpec
from mflab.surface import Frame2D, along

from conftest import gauss_curvature_orthogonal, orthogonal_metric, random_sm


def frame_at(sys, N, seed=0, order=5):
    x, y = random_sm(sys, N, seed=seed)
    return Frame2D(Geometry(sys, x, y, order)), x, y


ALL = {
    "euclidean": systems.euclidean_plane(1.0),
    "riemannian": systems.riemannian_torus(1.0),
    "orthogonal": MagneticSystem(orthogonal_metric(), area_form=1.0, strength=0.6),
    "randers": systems.randers_torus(1.0),
    "randers0": systems.randers_torus(0.0),
    "disk": systems.poincare_disk(0.5),
}


def test_euclidean_frame():
    th = 0.7
    d = frame(systems.euclidean_plane(0.0), FramePoint2D([0.3, -0.2], th))
    assert np.allclose(d.X, [np.cos(th), np.sin(th), 0.0], atol=1e-15)
    assert np.allclose(d.V, [0.0, 0.0, 1.0], atol=1e-15)
    # H = [V, X] is the positive rotation of the velocity
    assert np.allclose(d.H, [-np.sin(th), np.cos(th), 0.0], atol=1e-15)
    assert max(abs(d.I), abs(d.J), abs(d.K)) <= 1e-15


def test_orientation_gives_positive_curvature_on_sphere():
    sphere = MagneticSystem(MetricSpec("constant_curvature", 2, (), (), 1.0))
    fr, _, _ = frame_at(sphere, 50)
    assert np.allclose(fr.K.value, 1.0, atol=1e-12)


@pytest.mark.parametrize("metric,oracle", [
    (systems.riemannian_torus_metric(), lambda x: 0.0),
    (orthogonal_metric(), gauss_curvature_orthogonal),
    (MetricSpec.poincare_disk(-1.0), lambda x: -1.0),
])
def test_riemannian_structure_functions(metric, oracle):
    fr, x, _ = frame_at(MagneticSystem(metric), 200, seed=1)
    assert np.abs(fr.I.value).max() <= 1e-10
    assert np.abs(fr.J.value).max() <= 1e-10
    assert np.allclose(fr.K.value, [oracle(p) for p in x], atol=1e-7)


def test_randers_main_scalar_is_nonzero():
    fr, _, _ = frame_at(ALL["randers"], 200, seed=2)
    assert np.abs(fr.I.value).max() > 1e-2
    assert max(np.max(v) for v in fr.structure_residuals().values()) <= 1e-7


@pytest.mark.parametrize("name", sorted(ALL))
def test_bracket_relations_at_random_points(name):
    fr, _, _ = frame_at(ALL[name], 1000, seed=3)
    for k, v in fr.structure_residuals().items():
        assert np.max(v) <= 1e-7, k
    for k, v in fr.magnetic_residuals().items():
        assert np.max(v) <= 1e-7, k


def test_magnetic_quantities_examples():
    lam, Kbb, Q = magnetic_frame_quantities(systems.euclidean_plane(1.0), FramePoint2D([0.4, 0.1], 1.3))
    assert (lam, Kbb, Q) == pytest.approx((1.0, 1.0, 1.0), abs=1e-12)
    fr, _, _ = frame_at(systems.poincare_disk(0.5), 100, seed=4)
    assert np.allclose(fr.Q.value, -0.75, atol=1e-10)
    fr, _, _ = frame_at(ALL["randers0"], 100, seed=5)
    assert np.abs(fr.lam.value).max() == 0.0
    assert np.allclose(fr.Kbb.value, fr.K.value, atol=1e-15)
    assert np.allclose(fr.Q.value, fr.K.value, atol=1e-15)


def test_constant_field_on_riemannian_surface():
    fr, _, _ = frame_at(ALL["orthogonal"], 200, seed=6)
    assert np.allclose(fr.lam.value, 0.6, atol=1e-12)
    assert np.allclose(fr.Q.value, fr.K.value + 0.36, atol=1e-10)


def test_frame_point_data_is_consistent():
    sys = ALL["randers"]
    d = frame(sys, FramePoint2D([1.0, 2.0], 0.4))
    assert max(d.residuals.values()) <= 1e-7
    lam, Kbb, Q = magnetic_frame_quantities(sys, FramePoint2D([1.0, 2.0], 0.4))
    assert (d.lam, d.Kbb, d.Q) == (lam, Kbb, Q)


# 2D Pestov identity -----------------------------------------------------------------


cos_cos = Homog0(Product(pullback(TrigTerm((1, 0), 1.0)), Linear((IndexedTerm((0,), TrigTerm((0, 0), 1.0)),))))


def test_pestov_2d_constant():
    sys = ALL["randers"]
    x, _ = random_sm(sys, 20)
    rep = pestov_2d(sys, Const(3.0), x, np.linspace(0, 6, 20))
    assert rep.residual == 0.0
    assert np.abs(rep.lhs).max() == 0.0


def test_pestov_2d_randers_with_field():
    sys = ALL["randers"]
    rng = np.random.default_rng(7)
    x = rng.uniform(0, 2 * np.pi, (1000, 2))
    th = rng.uniform(0, 2 * np.pi, 1000)
    for u in (cos_cos, systems.sample_field()):
        rep = pestov_2d(sys, u, x, th)
        assert rep.residual <= 1e-7
        assert rep.meta["points"] == 1000


def test_pestov_2d_pullback_on_riemannian_torus():
    sys = systems.riemannian_torus(0.0)
    rng = np.random.default_rng(8)
    u = pullback(TrigTerm((1, 0), 1.0), TrigTerm((1, 1), 0.0, 0.5))
    rep = pestov_2d(sys, u, rng.uniform(0, 2 * np.pi, (300, 2)), rng.uniform(0, 2 * np.pi, 300))
    assert rep.residual <= 1e-8
    assert np.abs(rep.terms["Kbb"]).max() == 0.0  # V u = 0


def test_pestov_2d_at_frame_point():
    rep = pestov_2d(ALL["randers"], cos_cos, FramePoint2D([0.5, 0.5], 2.0))
    assert rep.residual <= 1e-10


@pytest.mark.parametrize("name", ["randers", "riemannian", "disk"])
def test_vertical_gradient_norm_for_degree_one(name):
    sys = ALL[name]
    th = Linear((IndexedTerm((0,), TrigTerm((0, 1), 1.0, 0.3)), IndexedTerm((1,), TrigTerm((1, 0), 0.5))))
    fr, x, y = frame_at(sys, 500, seed=9, order=4)
    geo = fr.geo
    u = th.build(geo)
    gv = raise_index(geo, vert(geo, u)).value
    lhs = np.einsum("pij,pi,pj->p", geo.g.value, gv, gv)
    Vu = along(fr.V, u).value
    assert np.abs(lhs - u.value**2 - Vu**2).max() <= 1e-10
