"""Canonical frame of a Finsler surface and its magnetic structure functions.

Vector fields live on TM minus the zero section in coordinates
``(x1, x2, y1, y2)``.  Each field used here is tangent to every level set of
F, so brackets computed at points of SM are brackets of the restricted
fields.  The frame:

* ``X``  geodesic spray ``(y, -2G)``
* ``V``  vertical field ``(0, y_perp / sqrt(det g))`` with ``y_perp = (-y_2, y_1)``
  built from ``y_i = g_ij y^j``; it is g-unit, g-orthogonal to y and positively oriented
* ``H``  ``[V, X]``

Structure functions come from expanding brackets in the frame completed by
the radial field ``y d/dy`` (whose coefficient must vanish).
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import jets
from .errors import FrameDegenerate
from .finsler import Geometry, jet_inverse
from .report import IdentityReport
from .specs import Point

E = jets.einsum


def bracket(A, B):
    """Lie bracket of vector-field jets of shape ``(N, 4)``."""
    dA = A.grad(range(4))
    dB = B.grad(range(4))
    return E("pca,pa->pc", dB, A) - E("pca,pa->pc", dA, B)


def along(A, f):
    """Derivative of the scalar jet ``f`` along the field ``A``."""
    return E("pa,pa->p", f.grad(range(4)), A)


def sm_points(metric, x, theta):
    """SM points ``(x, e(theta) / F(x, e(theta)))`` for angle arrays."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    e = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    e = np.broadcast_to(e, x.shape)
    return x, e / metric.F(x, e)[:, None]


class Frame2D:
    """Frame fields and structure functions on a 2D geometry (seed order >= 4; 5 for Q)."""

    def __init__(self, geo):
        if geo.n != 2:
            raise ValueError("the canonical frame needs dimension 2")
        self.geo = geo

    @cached_property
    def X(self):
        g = self.geo
        return jets.stack([g.Yc[:, 0], g.Yc[:, 1], g.G[:, 0] * -2.0, g.G[:, 1] * -2.0], -1)

    @cached_property
    def V(self):
        g = self.geo
        yl = g.ylow
        gv = g.g
        det = gv[:, 0, 0] * gv[:, 1, 1] - gv[:, 0, 1] * gv[:, 1, 0]
        s = jets.power(det, -0.5)
        zero = yl[:, 0] * 0.0
        return jets.stack([zero, zero, -yl[:, 1] * s, yl[:, 0] * s], -1)

    @cached_property
    def H(self):
        return bracket(self.V, self.X)

    @cached_property
    def radial(self):
        g = self.geo
        zero = g.Yc[:, 0] * 0.0
        return jets.stack([zero, zero, g.Yc[:, 0], g.Yc[:, 1]], -1)

    @cached_property
    def coframe(self):
        """Rows are the dual covectors of (X, H, V, radial)."""
        M = jets.stack([self.X, self.H, self.V, self.radial], -1)
        Mv = M.value
        det = np.linalg.det(Mv / np.linalg.norm(Mv, axis=1, keepdims=True))
        if np.any(~np.isfinite(det)) or np.any(np.abs(det) < 1e-12):
            raise FrameDegenerate("frame (X, H, V) fails to span")
        return jet_inverse(M)

    def coefficients(self, W):
        return E("pij,pj->pi", self.coframe, W)

    @cached_property
    def HV(self):
        return self.coefficients(bracket(self.H, self.V))

    @cached_property
    def XH(self):
        return self.coefficients(bracket(self.X, self.H))

    @cached_property
    def I(self):
        return self.HV[:, 1]

    @cached_property
    def J(self):
        return self.HV[:, 2]

    @cached_property
    def K(self):
        return self.XH[:, 2]

    @cached_property
    def lam(self):
        """lambda = Omega(dpi X, dpi H)."""
        g = self.geo
        om = g.Omega[:, 0, 1]
        y = g.Yc
        H = self.H
        return om * (y[:, 0] * H[:, 1] - y[:, 1] * H[:, 0])

    @cached_property
    def GM(self):
        return self.X + self.V * self.lam.expand(-1)

    @cached_property
    def Kbb(self):
        lam = self.lam
        return self.K - along(self.H, lam) + lam * lam - lam * self.J

    @cached_property
    def Q(self):
        lam = self.lam
        lI = lam * self.I
        return self.Kbb - lI * lI - along(self.GM, lI)

    def structure_residuals(self):
        """Max residuals of the three structure relations and the radial components."""
        hv, xh = self.HV.value, self.XH.value
        return {
            "VX_H": 0.0,  # H is defined as [V, X]
            "HV_X": np.abs(hv[:, 0] - 1.0),
            "XH_X": np.abs(xh[:, 0]),
            "XH_H": np.abs(xh[:, 1]),
            "radial": np.maximum(np.abs(hv[:, 3]), np.abs(xh[:, 3])),
        }

    def magnetic_residuals(self):
        """[V,GM] = H - lam I V, [H,V] = GM + I H + (J - lam) V, [GM,H] = Kbb V - lam GM - lam I H,
        and V(lam) = -lam I."""
        lam, I, J = self.lam, self.I, self.J
        lv = lam.expand(-1)
        r1 = bracket(self.V, self.GM) - self.H + self.V * (lam * I).expand(-1)
        r2 = bracket(self.H, self.V) - self.GM - self.H * I.expand(-1) - self.V * (J - lam).expand(-1)
        r3 = (
            bracket(self.GM, self.H)
            - self.V * self.Kbb.expand(-1)
            + self.GM * lv
            + self.H * (lam * I).expand(-1)
        )
        r4 = along(self.V, lam) + lam * I
        return {
            "V_GM": np.abs(r1.value).max(axis=-1),
            "H_V": np.abs(r2.value).max(axis=-1),
            "GM_H": np.abs(r3.value).max(axis=-1),
            "V_lambda": np.abs(r4.value),
        }

    def chart_vector(self, W):
        """Express a field value in (x1, x2, theta) chart components."""
        w = W.value
        y = self.geo.Yc.value
        r2 = y[:, 0] ** 2 + y[:, 1] ** 2
        dth = (y[:, 0] * w[:, 3] - y[:, 1] * w[:, 2]) / r2
        return np.stack([w[:, 0], w[:, 1], dth], axis=-1)

    def liouville_density(self):
        """|det (X, H, V)|^-1 in the (x1, x2, theta) chart."""
        M = np.stack([self.chart_vector(self.X), self.chart_vector(self.H), self.chart_vector(self.V)], -1)
        return 1.0 / np.abs(np.linalg.det(M))


# pointwise 2D identities ----------------------------------------------------


def pestov_2d_terms(fr, u):
    """Both sides of the 2D Pestov identity for a scalar jet ``u`` on SM."""
    GM, H, V = fr.GM, fr.H, fr.V
    Gu, Hu, Vu = along(GM, u), along(H, u), along(V, u)
    lhs = Hu * along(V, Gu) * 2.0
    terms = {
        "Gu_sq": Gu * Gu,
        "Hu_sq": Hu * Hu,
        "Kbb": -fr.Kbb * Vu * Vu,
        "GM_HuVu": along(GM, Hu * Vu),
        "H_GuVu": -along(H, Gu * Vu),
        "V_GuHu": along(V, Gu * Hu),
        "IJ": Gu * (fr.I * Hu + fr.J * Vu),
    }
    vals = {k: v.value for k, v in terms.items()}
    return lhs.value, sum(vals.values()), vals


def identity_2d_integrands(fr, u):
    """The four integrands of the 2D integral identity (needs seed order 5)."""
    GM, V = fr.GM, fr.V
    Gu, Vu = along(GM, u), along(V, u)
    GVu = along(GM, Vu)
    VGu = along(V, Gu)
    return {
        "GM_Vu_sq": (GVu * GVu).value,
        "Q_Vu_sq": (fr.Q * Vu * Vu).value,
        "V_GMu_sq": (VGu * VGu).value,
        "GMu_sq": (Gu * Gu).value,
    }


# point operations -----------------------------------------------------------


@dataclass(frozen=True)
class FramePoint2D:
    x: Point
    theta: float

    def __post_init__(self):
        if not isinstance(self.x, Point):
            object.__setattr__(self, "x", Point(self.x))


@dataclass(frozen=True)
class CoframeData2D:
    X: np.ndarray
    H: np.ndarray
    V: np.ndarray
    I: float
    J: float
    K: float
    lam: float
    Kbb: float
    Q: float
    residuals: dict


def _frame_at(sys, p, order):
    if sys.dim != 2:
        raise ValueError("frame needs a 2D system")
    x, y = sm_points(sys.metric, p.x.x[None, :], p.theta)
    return Frame2D(Geometry(sys, x, y, order))


def frame(sys, p):
    fr = _frame_at(sys, p, 5)
    res = {k: float(np.max(v)) for k, v in fr.structure_residuals().items()}
    res.update({k: float(np.max(v)) for k, v in fr.magnetic_residuals().items()})
    return CoframeData2D(
        fr.chart_vector(fr.X)[0],
        fr.chart_vector(fr.H)[0],
        fr.chart_vector(fr.V)[0],
        float(fr.I.value[0]),
        float(fr.J.value[0]),
        float(fr.K.value[0]),
        float(fr.lam.value[0]),
        float(fr.Kbb.value[0]),
        float(fr.Q.value[0]),
        res,
    )


def magnetic_frame_quantities(sys, p):
    fr = _frame_at(sys, p, 5)
    return float(fr.lam.value[0]), float(fr.Kbb.value[0]), float(fr.Q.value[0])


def pestov_2d(sys, u, x, theta=None):
    """Residual of the 2D Pestov identity at FramePoint2D(s) or arrays (x, theta)."""
    from .semibasic import ScalarJet

    field = u.field if isinstance(u, ScalarJet) else u
    if isinstance(x, FramePoint2D):
        x, theta = x.x.x[None, :], x.theta
    xs, ys = sm_points(sys.metric, x, theta)
    geo = Geometry(sys, xs, ys, 4)
    lhs, rhs, terms = pestov_2d_terms(Frame2D(geo), field.build(geo))
    return IdentityReport.build("pestov_2d", lhs, rhs, terms, {"points": int(geo.npts)})
