"""Named example systems used by the tests, the CLI and the README."""
from .coeffs import IndexedTerm, TrigTerm
from .specs import MagneticSystem, MetricSpec


def _t(freq, c=0.0, s=0.0, pow=()):
    return TrigTerm(freq, c, s, pow)


def unit_form(b=1.0, with_primitive=False):
    """Terms for Omega = b dx1 ^ dx2 and optionally beta = b x1 dx2."""
    om = (IndexedTerm((0, 1), _t((0, 0), b)),)
    prim = (IndexedTerm((1,), _t((0, 0), b, 0.0, (1, 0))),) if with_primitive else None
    return om, prim


def euclidean_plane(b=0.0, with_primitive=True):
    m = MetricSpec.euclidean(2)
    if not b:
        return MagneticSystem(m, primitive_terms=() if with_primitive else None)
    om, prim = unit_form(b, with_primitive)
    return MagneticSystem(m, om, primitive_terms=prim)


def flat_torus_metric(n=2):
    return MetricSpec.flat_torus(n)


def riemannian_torus_metric():
    """a_11 = 1 + cos(x1)/2, a_22 = 1."""
    return MetricSpec(
        "riemannian",
        2,
        (
            IndexedTerm((0, 0), _t((0, 0), 1.0)),
            IndexedTerm((0, 0), _t((1, 0), 0.5)),
            IndexedTerm((1, 1), _t((0, 0), 1.0)),
        ),
    )


def randers_torus_metric():
    return MetricSpec(
        "randers",
        2,
        (
            IndexedTerm((0, 0), _t((0, 0), 1.0)),
            IndexedTerm((0, 0), _t((0, 1), 0.3)),
            IndexedTerm((1, 1), _t((0, 0), 1.0)),
            IndexedTerm((1, 1), _t((1, 0), 0.0, 0.2)),
            IndexedTerm((0, 1), _t((1, 1), 0.1)),
        ),
        (
            IndexedTerm((0,), _t((0, 1), 0.3)),
            IndexedTerm((1,), _t((1, 0), 0.0, 0.2)),
        ),
    )


def _with_field(metric, b):
    if not b:
        return MagneticSystem(metric)
    om, _ = unit_form(b)
    return MagneticSystem(metric, om)


def flat_torus(b=0.0):
    return _with_field(flat_torus_metric(), b)


def riemannian_torus(b=0.0):
    return _with_field(riemannian_torus_metric(), b)


def randers_torus(b=0.0):
    return _with_field(randers_torus_metric(), b)


def poincare_disk(s=0.0, K0=-1.0):
    """Disk chart of curvature K0 with Omega = s * (area form)."""
    m = MetricSpec.poincare_disk(K0)
    if not s:
        return MagneticSystem(m)
    return MagneticSystem(m, area_form=1.0, strength=s)


NAMED = {
    "euclidean_plane": euclidean_plane,
    "flat_torus": flat_torus,
    "riemannian_torus": riemannian_torus,
    "randers_torus": randers_torus,
    "poincare_disk": poincare_disk,
}


def sample_field():
    """Degree-0 test function mixing pullback, linear and quadratic fiber dependence."""
    from .coeffs import IndexedTerm
    from .semibasic import Homog0, Linear, Product, pullback

    lin = Linear((IndexedTerm((0,), _t((0, 1), 1.0, 0.5)), IndexedTerm((1,), _t((0, 0), 0.7))))
    quad = Product(
        Linear((IndexedTerm((0,), _t((0, 0), 1.0)),)),
        Linear((IndexedTerm((1,), _t((1, 1), 0.4)),)),
    )
    return Homog0(Product(pullback(_t((1, 0), 0.3, 0.2)), lin)) + Homog0(quad)
