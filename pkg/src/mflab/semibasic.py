"""Semibasic fields and the horizontal, vertical and magnetic derivatives.

Tensor jets carry an index signature such as ``"ud"`` (one upper, one lower
index after the point axis).  Derivatives append a lower index:

* vertical   ``T_{.k}  = d_{y^k} T``
* horizontal ``T_{|k}  = d_{x^k} T - N^p_k d_{y^p} T`` plus a Chern term per index
* magnetic   ``T_{:k}  = T_{|k} + F Y^j_k T_{.j}``
"""
import string
from dataclasses import dataclass

import numpy as np

from . import jets
from .coeffs import IndexedTerm, TrigTerm, eval_terms, tensor_field
from .errors import ConfigError
from .finsler import Geometry
from .report import IdentityReport
from .specs import MagneticSystem, as_batch

_LETTERS = string.ascii_lowercase.replace("p", "")


# tensor derivatives -------------------------------------------------------


def vert(geo, T, sig=""):
    # vertical derivatives need no connection term, so the index signature is unused
    return geo.dy(T)


def horiz(geo, T, sig=""):
    dT = geo.dy(T)
    out = geo.dx(T) - _contract_last(dT, geo.N, "mk")
    G = geo.Gamma
    r = T.ndim - 1
    labs = _LETTERS[:r]
    for pos, s in enumerate(sig):
        src = labs.replace(labs[pos], "q")
        if s == "u":
            # + Gamma^i_{kq} T^{..q..}
            dst = labs + "k"
            term = jets.einsum(f"p{labs[pos]}kq,p{src}->p{dst}", G, T)
            out = out + term
        else:
            # - Gamma^q_{k j} T_{..q..}
            dst = labs + "k"
            term = jets.einsum(f"pqk{labs[pos]},p{src}->p{dst}", G, T)
            out = out - term
    return out


def magn(geo, T, sig=""):
    h = horiz(geo, T, sig)
    if not geo.system.has_field:
        return h
    v = vert(geo, T)
    r = T.ndim - 1
    labs = _LETTERS[:r]
    corr = jets.einsum(f"pjk,p{labs}j->p{labs}k", geo.Y, v)
    return h + corr * _bcast(geo.F, r + 1)


def _contract_last(dT, N, nlab):
    # dT[..., m] N[m, k] -> [..., k]
    r = dT.ndim - 2
    labs = _LETTERS[:r]
    return jets.einsum(f"p{labs}m,pmk->p{labs}k", dT, N)


def _bcast(s, r):
    for _ in range(r):
        s = s.expand(-1)
    return s


def trace(T):
    n = T.shape[-1]
    out = T[:, 0, 0]
    for i in range(1, n):
        out = out + T[:, i, i]
    return out


def raise_index(geo, w):
    return jets.einsum("pij,pj->pi", geo.ginv, w)


def inner(geo, u, v):
    return jets.einsum("pij,pi,pj->p", geo.g, u, v)


# scalar fields ------------------------------------------------------------


class Field:
    """Scalar field on TM minus the zero section; ``build`` returns its jet."""

    degree = 0

    def build(self, geo, y=None):
        raise NotImplementedError

    def to_json(self):
        raise NotImplementedError

    def __mul__(self, other):
        return Product(self, other)

    def __add__(self, other):
        return Sum(self, other)


@dataclass(frozen=True, eq=False)
class Const(Field):
    c: float = 1.0
    degree = 0

    def build(self, geo, y=None):
        return jets.Jet.constant(geo.z.space, np.full(geo.npts, float(self.c)))

    def to_json(self):
        return {"kind": "const", "c": self.c}


@dataclass(frozen=True, eq=False)
class Pullback(Field):
    """f(x) for a trigonometric polynomial f."""

    terms: tuple
    degree = 0

    def build(self, geo, y=None):
        return eval_terms(self.terms, geo.X)

    def __call__(self, x):
        return eval_terms(self.terms, np.asarray(x, dtype=float))

    def to_json(self):
        return {"kind": "pullback", "terms": [t.to_json() for t in self.terms]}


@dataclass(frozen=True, eq=False)
class Linear(Field):
    """theta_x(y) = theta_i(x) y^i."""

    terms: tuple
    degree = 1

    def build(self, geo, y=None):
        y = geo.Yc if y is None else y
        th = tensor_field(self.terms, geo.X, geo.n, 1)
        return jets.einsum("pi,pi->p", th, y)

    def coefficients(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return tensor_field(self.terms, x, x.shape[-1], 1)

    def to_json(self):
        return {"kind": "linear", "terms": [t.to_json() for t in self.terms]}


@dataclass(frozen=True, eq=False)
class FinslerNorm(Field):
    degree = 1

    def build(self, geo, y=None):
        if y is not None:
            raise ConfigError("the Finsler norm cannot be rescaled inside homog0")
        return geo.F

    def to_json(self):
        return {"kind": "finsler_norm"}


@dataclass(frozen=True, eq=False)
class Product(Field):
    a: Field
    b: Field

    @property
    def degree(self):
        return self.a.degree + self.b.degree

    def build(self, geo, y=None):
        return self.a.build(geo, y) * self.b.build(geo, y)

    def to_json(self):
        return {"kind": "product", "factors": [self.a.to_json(), self.b.to_json()]}


@dataclass(frozen=True, eq=False)
class Sum(Field):
    a: Field
    b: Field

    def __post_init__(self):
        if self.a.degree != self.b.degree:
            raise ConfigError("sum of fields with different homogeneity degrees")

    @property
    def degree(self):
        return self.a.degree

    def build(self, geo, y=None):
        return self.a.build(geo, y) + self.b.build(geo, y)

    def to_json(self):
        return {"kind": "sum", "terms": [self.a.to_json(), self.b.to_json()]}


@dataclass(frozen=True, eq=False)
class Homog0(Field):
    """Degree-0 extension u(x, y / F(x, y))."""

    base: Field
    degree = 0

    def build(self, geo, y=None):
        if y is not None:
            return self.base.build(geo, y)  # already on the indicatrix scale
        Fi = geo.F.reciprocal()
        return self.base.build(geo, geo.Yc * Fi.expand(-1))

    def to_json(self):
        return {"kind": "homog0", "base": self.base.to_json()}


def field_from_json(d):
    kind = d.get("kind")
    if kind == "const":
        return Const(float(d.get("c", 1.0)))
    if kind == "pullback":
        return Pullback(tuple(TrigTerm.from_json(t) for t in d["terms"]))
    if kind == "linear":
        return Linear(tuple(IndexedTerm.from_json(t, 1) for t in d["terms"]))
    if kind == "finsler_norm":
        return FinslerNorm()
    if kind == "product":
        fs = [field_from_json(f) for f in d["factors"]]
        out = fs[0]
        for f in fs[1:]:
            out = Product(out, f)
        return out
    if kind == "sum":
        fs = [field_from_json(f) for f in d["terms"]]
        out = fs[0]
        for f in fs[1:]:
            out = Sum(out, f)
        return out
    if kind == "homog0":
        return Homog0(field_from_json(d["base"]))
    raise ConfigError(f"unknown field kind {kind!r}")


def pullback(*terms):
    return Pullback(tuple(terms))


def linear(*pairs):
    """``linear((i, TrigTerm), ...)`` builds theta = sum theta_i dx^i."""
    return Linear(tuple(IndexedTerm((i,), t) for i, t in pairs))


# evaluators -----------------------------------------------------------------


class ScalarJet:
    """A scalar field bound to a magnetic system; evaluates all derivatives it needs.

    Second derivatives are nested: ``second("|.")[p, l, k] = u_{|l.k}`` means
    first ``|`` along ``l``, then ``.`` along ``k``.
    """

    def __init__(self, system, field):
        if not isinstance(system, MagneticSystem):
            system = MagneticSystem(system)
        self.system = system
        self.field = field
        self.homogeneity_degree = field.degree

    def _geo(self, v, y, order):
        x, yy = as_batch(v, y)
        return Geometry(self.system, x, yy, order), y is None

    def _first(self, geo, kind):
        u = self.field.build(geo)
        return {".": vert, "|": horiz, ":": magn}[kind](geo, u)

    def value(self, v, y=None):
        geo, s = self._geo(v, y, 0)
        out = self.field.build(geo).value
        return out[0] if s else out

    def vertical(self, v, y=None):
        return self.first(".", v, y)

    def horizontal(self, v, y=None):
        return self.first("|", v, y)

    def magnetic(self, v, y=None):
        return self.first(":", v, y)

    def first(self, kind, v, y=None):
        geo, s = self._geo(v, y, 3)
        out = self._first(geo, kind).value
        return out[0] if s else out

    def second(self, kinds, v, y=None):
        geo, s = self._geo(v, y, 4)
        d1 = self._first(geo, kinds[0])
        op = {".": vert, "|": horiz, ":": magn}[kinds[1]]
        out = op(geo, d1, "d").value
        return out[0] if s else out


class SemibasicVectorField:
    """Vector field U^i(x, y) given by a builder ``geo -> Jet (N, n)``."""

    def __init__(self, system, builder, degree, name="U"):
        if not isinstance(system, MagneticSystem):
            system = MagneticSystem(system)
        self.system = system
        self.builder = builder
        self.degree = degree
        self.name = name

    @classmethod
    def position(cls, system):
        return cls(system, lambda geo: geo.Yc, 1, "y")

    @classmethod
    def vertical_gradient(cls, system, field):
        def b(geo):
            return raise_index(geo, vert(geo, field.build(geo)))

        return cls(system, b, field.degree - 1, "grad_v")

    @classmethod
    def magnetic_gradient(cls, system, field):
        def b(geo):
            return raise_index(geo, magn(geo, field.build(geo)))

        return cls(system, b, field.degree, "grad_m")

    def _geo(self, v, y, order):
        x, yy = as_batch(v, y)
        return Geometry(self.system, x, yy, order), y is None

    def value(self, v, y=None):
        geo, s = self._geo(v, y, 2)
        out = self.builder(geo).value
        return out[0] if s else out

    def derivative(self, kind, v, y=None):
        geo, s = self._geo(v, y, 4)
        U = self.builder(geo)
        out = {".": vert, "|": horiz, ":": magn}[kind](geo, U, "u").value
        return out[0] if s else out


# point operations -----------------------------------------------------------


def _scalar_jet(system, u):
    if isinstance(u, ScalarJet):
        return u
    return ScalarJet(system, u)


def horizontal_derivative(m, u, v, y=None):
    return _scalar_jet(m, u).first("|", v, y)


def vertical_derivative(u, v, y=None, system=None):
    if isinstance(u, ScalarJet):
        return u.first(".", v, y)
    if system is None:
        raise ValueError("a bare field needs a system")
    return ScalarJet(system, u).first(".", v, y)


def vertical_gradient(u, v, y=None):
    """The raised vertical derivative (the vertical gradient)."""
    x, yy = as_batch(v, y)
    geo = Geometry(u.system, x, yy, 3)
    out = raise_index(geo, vert(geo, u.field.build(geo))).value
    return out[0] if y is None else out


def magnetic_derivative(sys, u, v, y=None):
    return _scalar_jet(sys, u).first(":", v, y)


def X_scalar(sys, u, v, y=None):
    u = _scalar_jet(sys, u)
    x, yy = as_batch(v, y)
    geo = Geometry(u.system, x, yy, 3)
    out = X_jet(geo, u.field.build(geo)).value
    return out[0] if y is None else out


def X_jet(geo, u):
    """The operator X applied to a scalar jet: y^i u_{:i}."""
    return jets.einsum("pi,pi->p", geo.Yc, magn(geo, u))


def X_vector_jet(geo, U):
    """X V^i = y^k V^i_{:k}."""
    return jets.einsum("pik,pk->pi", magn(geo, U, "u"), geo.Yc)


def X_field(sys, U, v, y=None):
    x, yy = as_batch(v, y)
    geo = Geometry(U.system, x, yy, 4)
    out = X_vector_jet(geo, U.builder(geo)).value
    return out[0] if y is None else out


def divergences(sys, U, v, y=None):
    x, yy = as_batch(v, y)
    geo = Geometry(U.system, x, yy, 4)
    J = U.builder(geo)
    dv = trace(vert(geo, J)).value
    dh = trace(horiz(geo, J, "u")).value
    dm = trace(magn(geo, J, "u")).value
    if y is None:
        return float(dv[0]), float(dh[0]), float(dm[0])
    return dv, dh, dm


def modified_tensors(geo):
    """P-tilde^i_{lk} and R-tilde^i_{lk} of the magnetic commutation relations."""
    Y = geo.Y
    yl = geo.ylow
    Yv = vert(geo, Y)  # Yv[i, l, k] = Y^i_{l.k}
    Yh = horiz(geo, Y, "ud")  # Yh[i, l, k] = Y^i_{l|k}
    P = geo.P
    Pt = P + jets.einsum("pil,pk->pilk", Y, yl) + Yv
    Rt = (
        geo.R
        + (Yh - Yh.swapaxes(2, 3))
        # sign of the P.Y pair follows from (hv); the Y.Y_. pair vanishes by symmetry of C
        + (jets.einsum("pilm,pmk->pilk", P, Y) - jets.einsum("pikm,pml->pilk", P, Y))
        + (jets.einsum("pjl,pikj->pilk", Y, Yv) - jets.einsum("pjk,pilj->pilk", Y, Yv))
        + jets.einsum("ps,psk,pil->pilk", yl, Y, Y)
        - jets.einsum("ps,psl,pik->pilk", yl, Y, Y)
    )
    return Pt, Rt


def commutation_reports(geo, u):
    """Residual reports of the five commutation relations for a scalar jet ``u``."""
    ud = vert(geo, u)
    uh = horiz(geo, u)
    um = magn(geo, u)
    udv = ud.value
    out = []

    vv = vert(geo, ud).value
    out.append(IdentityReport.build("vv", vv - np.swapaxes(vv, 1, 2), np.zeros_like(vv)))

    hv = vert(geo, uh).value - np.swapaxes(horiz(geo, ud, "d").value, 1, 2)
    out.append(IdentityReport.build("hv", hv, np.einsum("pilk,pi->plk", geo.P.value, udv)))

    hh = horiz(geo, uh, "d").value
    out.append(IdentityReport.build("hh", hh - np.swapaxes(hh, 1, 2), np.einsum("pilk,pi->plk", geo.R.value, udv)))

    Pt, Rt = modified_tensors(geo)
    mv = vert(geo, um).value - np.swapaxes(magn(geo, ud, "d").value, 1, 2)
    out.append(IdentityReport.build("mv", mv, np.einsum("pilk,pi->plk", Pt.value, udv)))

    mm = magn(geo, um, "d").value
    out.append(IdentityReport.build("mm", mm - np.swapaxes(mm, 1, 2), np.einsum("pilk,pi->plk", Rt.value, udv)))
    return out


def check_commutation(sys, u, v, y=None):
    """Residuals of (vv), (hv), (hh), (mv), (mm); the last two need points on SM."""
    u = _scalar_jet(sys, u)
    x, yy = as_batch(v, y)
    geo = Geometry(u.system, x, yy, 4)
    return commutation_reports(geo, u.field.build(geo))
