"""Pointwise and integrated energy identities on the unit sphere bundle."""
import numpy as np

from . import jets
from .errors import HypothesisUnverified, UnsupportedChart
from .finsler import Geometry
from .report import IdentityReport
from .semibasic import (X_jet, X_vector_jet, horiz, magn, modified_tensors, raise_index, trace, vert)

E = jets.einsum

PESTOV_TERMS = ("grad_m_sq", "X_cross", "div_m", "div_v", "R_tilde", "Y", "mean_cartan", "mean_landsberg")
INTEGRAL_TERMS = ("X_grad_v_sq", "R", "L", "grad_vX_Y", "Yy_sq", "grad_m_Y", "hY")

# The Landsberg term enters the integrated identities as -l_sign * L(Y(y), ., .).
# l_sign = +1 is the printed form; the identities hold with -1, the sign that
# follows once the P.Y pair in R-tilde carries its corrected sign.
L_SIGN = -1.0


def _g(geo, a, b):
    return E("pij,pi,pj->p", geo.g, a, b)


class NablaPack:
    """The derived fields of a degree-0 scalar jet that the identities share."""

    def __init__(self, geo, u):
        self.geo = geo
        self.u = u
        self.ud = vert(geo, u)
        self.um = magn(geo, u)
        self.V = raise_index(geo, self.ud)  # vertical gradient
        self.W = raise_index(geo, self.um)  # magnetic gradient
        self.Xu = E("pi,pi->p", geo.Yc, self.um)
        self.VXu = raise_index(geo, vert(geo, self.Xu))


def pestov_nd_terms(geo, u):
    """Both sides of the n-D pointwise Pestov identity and its eight terms."""
    p = NablaPack(geo, u)
    lhs = _g(geo, p.W, p.VXu) * 2.0
    w = E("pi,pij,pj->p", p.um, geo.ginv, p.ud)
    Xu = p.Xu.expand(-1)
    _, Rt = modified_tensors(geo)
    Rty = E("pikl,pk,pl->pi", Rt, p.V, geo.Yc)
    YV = E("pij,pj->pi", geo.Y, p.V)
    terms = {
        "grad_m_sq": _g(geo, p.W, p.W),
        "X_cross": X_jet(geo, w),
        "div_m": -trace(magn(geo, p.V * Xu, "u")),
        "div_v": trace(vert(geo, p.W * Xu)),
        "R_tilde": -_g(geo, Rty, p.V),
        "Y": _g(geo, YV, p.W),
        "mean_cartan": E("pk,pk->p", geo.mean_cartan, p.W * Xu) * 2.0,
        "mean_landsberg": E("pk,pk->p", geo.mean_landsberg, p.V * Xu),
    }
    vals = {k: v.value for k, v in terms.items()}
    return lhs.value, sum(vals.values()), vals


def xnabla_terms(geo, u):
    p = NablaPack(geo, u)
    XV = X_vector_jet(geo, p.V)
    lhs = _g(geo, XV, XV)
    YyV = _g(geo, geo.Yy, p.V)
    terms = {
        "grad_vX_sq": _g(geo, p.VXu, p.VXu),
        "grad_m_sq": _g(geo, p.W, p.W),
        "cross": -_g(geo, p.W, p.VXu) * 2.0,
        "Yy_sq": YyV * YyV,
    }
    vals = {k: v.value for k, v in terms.items()}
    return lhs.value, sum(vals.values()), vals


def integral_nd_integrands(geo, u, l_sign=L_SIGN):
    """Seven left-hand integrands and the right-hand integrand of the n-D integral identity."""
    p = NablaPack(geo, u)
    n = geo.n
    XV = X_vector_jet(geo, p.V)
    YV = E("pij,pj->pi", geo.Y, p.V)
    YyV = _g(geo, geo.Yy, p.V)
    Yh = horiz(geo, geo.Y, "ud")
    hY = E("pijk,pj,pk->pi", Yh, geo.Yc, p.V)
    left = {
        "X_grad_v_sq": _g(geo, XV, XV),
        "R": -E("pik,pk,pim,pm->p", geo.Rop, p.V, geo.g, p.V),
        "L": E("pijk,pi,pj,pk->p", geo.L, geo.Yy, p.V, p.V) * -l_sign,
        "grad_vX_Y": -_g(geo, p.VXu, YV),
        "Yy_sq": YyV * YyV * -2.0,
        "grad_m_Y": _g(geo, p.W, YV),
        "hY": _g(geo, hY, p.V),
    }
    right = _g(geo, p.VXu, p.VXu) - p.Xu * p.Xu * float(n)
    return {k: v.value for k, v in left.items()}, right.value


def menqc_integrand(geo, u, l_sign=L_SIGN):
    p = NablaPack(geo, u)
    XV = X_vector_jet(geo, p.V)
    # C-tilde(V) = R_y(V) - Y(X V) - (nabla_|V Y)(y)
    Yh = horiz(geo, geo.Y, "ud")
    Ct = (
        E("pik,pk->pi", geo.Rop, p.V)
        - E("pij,pj->pi", geo.Y, XV)
        - E("pijk,pj,pk->pi", Yh, geo.Yc, p.V)
    )
    YyV = _g(geo, geo.Yy, p.V)
    val = (
        _g(geo, XV, XV)
        - _g(geo, Ct, p.V)
        - E("pijk,pi,pj,pk->p", geo.L, geo.Yy, p.V, p.V) * l_sign
        - YyV * YyV
    )
    return val.value, p.Xu.value


# pointwise operations -------------------------------------------------------


def _points(sys, field, v, y, order):
    from .specs import as_batch
    from .semibasic import ScalarJet

    if isinstance(field, ScalarJet):
        field = field.field
    x, yy = as_batch(v, y)
    geo = Geometry(sys, x, yy, order)
    return geo, field.build(geo)


def pestov_nd_pointwise(sys, u, v, y=None):
    geo, uj = _points(sys, u, v, y, 4)
    lhs, rhs, terms = pestov_nd_terms(geo, uj)
    return IdentityReport.build("pestov_nd", lhs, rhs, terms, {"points": int(geo.npts)})


def xnabla_pointwise(sys, u, v, y=None):
    geo, uj = _points(sys, u, v, y, 4)
    lhs, rhs, terms = xnabla_terms(geo, uj)
    return IdentityReport.build("xnabla", lhs, rhs, terms, {"points": int(geo.npts)})


# quadrature on SM -----------------------------------------------------------


class QuadratureGrid:
    """Tensor grid on the torus times the indicatrix with Liouville weights.

    Fiber points are ``y = omega / F(x, omega)`` for unit Euclidean directions
    ``omega``; the weight of a node is ``det g(x, omega) F(x, omega)^-n``
    times the product of the coordinate weights (``dx`` and the round
    measure ``d sigma(omega)``).
    """

    def __init__(self, sys, N_x, N_f):
        m = sys.metric
        if not m.periodic:
            raise UnsupportedChart("integral identities need a periodic (torus) chart")
        if N_x < 4 or N_f < 4:
            raise ValueError("grid sizes must be at least 4")
        n = sys.dim
        if n not in (2, 3):
            raise UnsupportedChart("fiber quadrature is implemented for n = 2 and n = 3")
        self.system, self.N_x, self.N_f, self.n = sys, int(N_x), int(N_f), n
        ax = 2 * np.pi * np.arange(N_x) / N_x
        xs = np.stack(np.meshgrid(*([ax] * n), indexing="ij"), -1).reshape(-1, n)
        wx = (2 * np.pi / N_x) ** n
        if n == 2:
            th = 2 * np.pi * np.arange(N_f) / N_f
            om = np.stack([np.cos(th), np.sin(th)], -1)
            wf = np.full(N_f, 2 * np.pi / N_f)
        else:
            c, wc = np.polynomial.legendre.leggauss(N_f)
            ph = 2 * np.pi * np.arange(2 * N_f) / (2 * N_f)
            C, P = np.meshgrid(c, ph, indexing="ij")
            s = np.sqrt(1 - C**2)
            om = np.stack([s * np.cos(P), s * np.sin(P), C], -1).reshape(-1, 3)
            wf = np.repeat(wc, 2 * N_f) * (np.pi / N_f)
        X = np.repeat(xs, len(om), axis=0)
        Om = np.tile(om, (len(xs), 1))
        F = m.F(X, Om)
        self.x = X
        self.y = Om / F[:, None]
        self._base_w = wx * np.tile(wf, len(xs))
        self._F = F
        self._w = None

    @property
    def weights(self):
        if self._w is None:
            dets = self.map(lambda geo: np.linalg.det(geo.g.value), order=2)
            # g is 0-homogeneous, so det g(x, y) = det g(x, omega)
            self._w = self._base_w * dets * self._F ** (-self.n)
        return self._w

    @property
    def size(self):
        return len(self.x)

    @property
    def volume(self):
        return self.integrate(np.ones(self.size))

    def map(self, fn, order, chunk=2048):
        """Evaluate ``fn(geo)`` (dict of arrays or an array) chunk by chunk over the nodes."""
        parts = []
        for s in range(0, self.size, chunk):
            geo = Geometry(self.system, self.x[s:s + chunk], self.y[s:s + chunk], order)
            parts.append(fn(geo))
        if isinstance(parts[0], dict):
            return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
        if isinstance(parts[0], tuple):
            return tuple(_concat([p[i] for p in parts]) for i in range(len(parts[0])))
        return np.concatenate(parts)

    def integrate(self, values):
        # numpy's pairwise summation over a fixed node order: reproducible
        return float(np.sum(self.weights * values))

    def meta(self):
        return {"N_x": self.N_x, "N_f": self.N_f, "nodes": self.size}


def _concat(parts):
    if isinstance(parts[0], dict):
        return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}
    return np.concatenate(parts)


def build_grid(sys, N_x, N_f):
    return QuadratureGrid(sys, N_x, N_f)


def _integrated_report(name, grid, left, right, lhs_keys=None, rhs_keys=None):
    """Report with integrated per-term values; ``left``/``right`` are dicts of node arrays."""
    li = {k: grid.integrate(v) for k, v in left.items()}
    ri = {k: grid.integrate(v) for k, v in right.items()}
    terms = dict(li)
    terms.update({("rhs:" + k if k in li else k): v for k, v in ri.items()})
    return IdentityReport.build(name, sum(li.values()), sum(ri.values()), terms, grid.meta())


def _field(u):
    from .semibasic import ScalarJet

    return u.field if isinstance(u, ScalarJet) else u


def gauss_ostrogradskii(sys, U, grid):
    """Integrated vertical and horizontal divergence formulas for a homogeneous field U."""
    lam = U.degree
    n = sys.dim

    def fn(geo):
        J = U.builder(geo)
        dv = trace(vert(geo, J)).value
        dh = trace(horiz(geo, J, "u")).value
        Uy = E("pi,pi->p", geo.ylow, J).value
        I = E("pk,pk->p", geo.mean_cartan, J).value
        Jl = E("pk,pk->p", geo.mean_landsberg, J).value
        return {"div_v": dv, "div_h": dh, "Uy": Uy, "I": I, "J": Jl}

    v = grid.map(fn, 4)
    rv = _integrated_report(
        "gauss_ostrogradskii_vertical", grid, {"div_v": v["div_v"]},
        {"degree_term": (lam + n - 1) * v["Uy"], "mean_cartan": -2.0 * v["I"]},
    )
    rh = _integrated_report("gauss_ostrogradskii_horizontal", grid, {"div_h": v["div_h"]}, {"mean_landsberg": v["J"]})
    return rv, rh


def int_nabla_checks(sys, h, theta, grid):
    """For phi = h F + theta(y):  int psi = 0  and  int |grad_v phi|^2 = int (h^2 + n psi^2)."""
    from .semibasic import FinslerNorm, Product

    n = sys.dim

    def fn(geo):
        hv = h.build(geo)
        psi = theta.build(geo)
        phi = Product(h, FinslerNorm()).build(geo) + psi
        gv = raise_index(geo, vert(geo, phi))
        return {"psi": psi.value, "grad_sq": _g(geo, gv, gv).value, "h_sq": (hv * hv).value}

    v = grid.map(fn, 2)
    r1 = IdentityReport.build("int_nabla_linear", grid.integrate(v["psi"]), 0.0,
                              {"psi": grid.integrate(v["psi"])}, grid.meta())
    r2 = _integrated_report("int_nabla_gradient", grid, {"grad_sq": v["grad_sq"]},
                            {"h_sq": v["h_sq"], "n_psi_sq": n * v["psi"] ** 2})
    return r1, r2


def integral_identity_2d(sys, u, grid):
    """int (G_M V u)^2 - int Q (V u)^2  =  int (V G_M u)^2 - int (G_M u)^2."""
    from .surface import Frame2D, identity_2d_integrands

    if sys.dim != 2:
        raise ValueError("the 2D identity needs dimension 2")
    f = _field(u)
    v = grid.map(lambda geo: identity_2d_integrands(Frame2D(geo), f.build(geo)), 5)
    return _integrated_report(
        "integral_2d", grid,
        {"GM_Vu_sq": v["GM_Vu_sq"], "Q_Vu_sq": -v["Q_Vu_sq"]},
        {"V_GMu_sq": v["V_GMu_sq"], "GMu_sq": -v["GMu_sq"]},
    )


def integral_identity_nd(sys, u, grid, l_sign=L_SIGN):
    """Seven-term left side against  int (|grad_v X u|^2 - n (X u)^2)."""
    f = _field(u)

    def fn(geo):
        left, right = integral_nd_integrands(geo, f.build(geo), l_sign)
        left = dict(left)
        left["__right"] = right
        return left

    v = grid.map(fn, 4)
    right = v.pop("__right")
    return _integrated_report("integral_nd", grid, v, {"right": right})


def menqc_functional(sys, u, grid, h=None, theta=None, tol=1e-8, l_sign=L_SIGN):
    """Integral of |X grad_v u|^2 - <C(grad_v u), grad_v u> - L(Y(y), ., .) - <Y(y), grad_v u>^2.

    The hypothesis X u = h(x) + theta_x(y) is checked at every node.
    """
    f = _field(u)

    def fn(geo):
        val, Xu = menqc_integrand(geo, f.build(geo), l_sign)
        target = np.zeros(geo.npts)
        if h is not None:
            target = target + h.build(geo).value
        if theta is not None:
            target = target + theta.build(geo).value
        return {"val": val, "gap": np.abs(Xu - target)}

    v = grid.map(fn, 4)
    gap = float(v["gap"].max())
    if gap > tol:
        raise HypothesisUnverified(f"X u differs from h + theta by {gap:.3e}")
    return grid.integrate(v["val"])


# 2D <-> n-D dictionary -------------------------------------------------------


DICTIONARY_TERMS = ("X_grad_v_sq", "R", "grad_vX_Y", "Yy", "grad_m_Y", "hY")


def term_dictionary(sys, u, x, y):
    """The six term correspondences between the n-D and 2D formulations (Riemannian surfaces).

    Returns ``{name: (nd_values, 2d_values)}``.
    """
    from .surface import Frame2D, along

    geo = Geometry(sys, x, y, 4)
    uj = _field(u).build(geo)
    p = NablaPack(geo, uj)
    fr = Frame2D(geo)
    Vu = along(fr.V, uj)
    GMu = along(fr.GM, uj)
    GMVu = along(fr.GM, Vu)
    lam = fr.lam
    XV = X_vector_jet(geo, p.V)
    YV = E("pij,pj->pi", geo.Y, p.V)
    Yh = horiz(geo, geo.Y, "ud")
    hY = E("pijk,pj,pk->pi", Yh, geo.Yc, p.V)
    v = lambda j: j.value
    return {
        "X_grad_v_sq": (v(_g(geo, XV, XV)), v(GMVu * GMVu + lam * lam * Vu * Vu)),
        "R": (v(E("pik,pk,pim,pm->p", geo.Rop, p.V, geo.g, p.V)), v(Vu * Vu * fr.K)),
        "grad_vX_Y": (v(_g(geo, p.VXu, YV)), v(-lam * GMu * Vu)),
        "Yy": (v(_g(geo, geo.Yy, p.V)), v(lam * Vu)),
        "grad_m_Y": (v(_g(geo, p.W, YV)), v(-lam * GMu * Vu)),
        "hY": (v(_g(geo, hY, p.V)), v(Vu * Vu * along(fr.H, lam))),
    }
