"""Finsler metric, fundamental tensor, Chern connection and curvature.

Everything is computed by :class:`Geometry`, which seeds jets in the
variables ``z = (x, y)`` at a batch of points of TM minus the zero section
and derives each tensor lazily.  Each derivative costs one order, so the
seed order bounds what can be evaluated:

=====================  ================
quantity               order available
=====================  ================
F, E = F^2/2           K
g, g^-1, Y             K - 2
C, G                   K - 3 / K - 2
N, Gamma               K - 3
P, R, L                K - 4
=====================  ================

The geodesic coefficients use the Euler-Lagrange form
``G^i = 1/2 g^il (E_{y^l x^k} y^k - E_{x^l})``, which needs one derivative
fewer than the Christoffel-type expression; both agree (tested).
"""
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import jets
from .errors import DegenerateTensor, NonPositiveMetric
from .specs import MagneticSystem, MetricSpec, as_batch


def jet_inverse(A):
    """Inverse of a batch of matrices given as a jet ``(N, n, n)``."""
    a0 = A.value
    inv0 = np.linalg.inv(a0)
    delta = A + (-a0)
    step = -jets.einsum("pij,pjk->pik", inv0, delta)
    out = jets.Jet.constant(A.space, inv0, A.k)
    term = jets.Jet.constant(A.space, inv0, A.k)
    for _ in range(A.k):
        term = jets.einsum("pij,pjk->pik", step, term)
        out = out + term
    return out


class Geometry:
    """Lazily computed geometric jets at ``(x, y)`` for a metric and optional field."""

    def __init__(self, system, x, y, order=4):
        if isinstance(system, MetricSpec):
            system = MagneticSystem(system)
        self.system = system
        self.metric = system.metric
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        self.metric.chart_check(x)
        if np.any(np.all(y == 0.0, axis=-1)):
            raise ValueError("y must be nonzero")
        self.n = n = x.shape[-1]
        self.order = order
        self.npts = x.shape[0]
        self.z = jets.seed(np.concatenate([x, y], axis=-1), order)
        self.xv = range(n)
        self.yv = range(n, 2 * n)

    # coordinates ---------------------------------------------------------
    @cached_property
    def X(self):
        return self.z[:, : self.n]

    @cached_property
    def Yc(self):
        """Fiber coordinates y as a jet."""
        return self.z[:, self.n:]

    def dx(self, T):
        return T.grad(self.xv)

    def dy(self, T):
        return T.grad(self.yv)

    # metric --------------------------------------------------------------
    @cached_property
    def a(self):
        return self.metric.a(self.X)

    @cached_property
    def F(self):
        y = self.Yc
        a2 = jets.einsum("pij,pi,pj->p", self.a, y, y)
        F = jets.sqrt(a2)
        if self.metric.kind == "randers":
            F = F + jets.einsum("pi,pi->p", self.metric.b(self.X), y)
        if np.any(F.value <= 0.0):
            raise NonPositiveMetric("F <= 0 at an evaluation point")
        return F

    @cached_property
    def E(self):
        if self.metric.kind == "randers":
            return self.F * self.F * 0.5
        # quadratic case keeps E exactly polynomial in y
        y = self.Yc
        return jets.einsum("pij,pi,pj->p", self.a, y, y) * 0.5

    @cached_property
    def Ey(self):
        return self.dy(self.E)

    @cached_property
    def g(self):
        h = self.dy(self.Ey)
        g = (h + h.T) * 0.5
        ev = np.linalg.eigvalsh(g.value)
        if np.any(ev[:, 0] <= 0.0):
            raise DegenerateTensor("fundamental tensor is not positive definite")
        return g

    @cached_property
    def ginv(self):
        return jet_inverse(self.g)

    @cached_property
    def C(self):
        return self.dy(self.g) * 0.5

    @cached_property
    def ylow(self):
        """y_i = g_ij y^j."""
        return jets.einsum("pij,pj->pi", self.g, self.Yc)

    # connection ----------------------------------------------------------
    @cached_property
    def G(self):
        Ex = self.dx(self.E)
        Exy = self.dx(self.Ey)  # Exy[l, k] = d_xk E_yl
        t = jets.einsum("plk,pk->pl", Exy, self.Yc) - Ex
        return jets.einsum("pil,pl->pi", self.ginv, t) * 0.5

    @cached_property
    def N(self):
        return self.dy(self.G)

    @cached_property
    def delta_g(self):
        """delta_k g_ij with delta_k = d_xk - N^m_k d_ym."""
        return self.dx(self.g) - jets.einsum("pijm,pmk->pijk", self.C * 2.0, self.N)

    @cached_property
    def Gamma(self):
        d = self.delta_g
        s = d + d.swapaxes(1, 3) - d.swapaxes(2, 3)  # s[j,l,k] = d[j,l,k] + d[k,l,j] - d[j,k,l]
        return jets.einsum("pil,pjlk->pijk", self.ginv, s) * 0.5

    # curvature -----------------------------------------------------------
    @cached_property
    def dGamma_y(self):
        return self.dy(self.Gamma)

    @cached_property
    def Pfull(self):
        return -self.dGamma_y

    @cached_property
    def P(self):
        return jets.einsum("pj,pijkl->pikl", self.Yc, self.Pfull)

    @cached_property
    def Rfull(self):
        Gm = self.Gamma
        dGx = self.dx(Gm)  # dGx[i,j,l,k] = d_xk Gamma^i_jl
        dGy = self.dGamma_y
        N = self.N
        t1 = dGx.swapaxes(3, 4) - dGx
        t2 = jets.einsum("pijkm,pml->pijkl", dGy, N)
        t3 = jets.einsum("pmjl,pimk->pijkl", Gm, Gm)
        return t1 + t2 - t2.swapaxes(3, 4) + t3 - t3.swapaxes(3, 4)

    @cached_property
    def R(self):
        return jets.einsum("pj,pijkl->pikl", self.Yc, self.Rfull)

    @cached_property
    def Rop(self):
        return jets.einsum("pikl,pl->pik", self.R, self.Yc)

    @cached_property
    def L(self):
        return -jets.einsum("pim,pmjk->pijk", self.g, self.P)

    @cached_property
    def mean_cartan(self):
        return jets.einsum("pij,pijk->pk", self.ginv, self.C)

    @cached_property
    def mean_landsberg(self):
        return jets.einsum("pij,pkij->pk", self.ginv, self.L)

    # magnetic field ------------------------------------------------------
    @cached_property
    def Omega(self):
        return self.system.Omega(self.X)

    @cached_property
    def Y(self):
        """Lorentz force Y^i_j = Omega_jk g^ik."""
        return jets.einsum("pjk,pik->pij", self.Omega, self.ginv)

    @cached_property
    def Yy(self):
        return jets.einsum("pij,pj->pi", self.Y, self.Yc)


# packs and point operations ---------------------------------------------


@dataclass(frozen=True)
class FundamentalTensorPack:
    g: np.ndarray
    g_inv: np.ndarray
    C: np.ndarray
    F_value: float


@dataclass(frozen=True)
class ConnectionPack:
    G: np.ndarray
    N: np.ndarray
    Gamma: np.ndarray


@dataclass(frozen=True)
class CurvaturePack:
    P: np.ndarray
    R: np.ndarray
    R_op: np.ndarray
    L: np.ndarray
    meanCartan: np.ndarray
    meanLandsberg: np.ndarray


def _single(arr, single):
    return arr[0] if single else arr


def _geom(m, v, y, order):
    single = y is None
    x, yy = as_batch(v, y)
    return Geometry(m, x, yy, order), single


def eval_F(m, v, y=None):
    """F(x, y); accepts a TangentVector or arrays ``x, y`` of shape ``(N, n)``."""
    x, yy = as_batch(v, y)
    if isinstance(m, MagneticSystem):
        m = m.metric
    m.chart_check(x)
    F = m.F(x, yy)
    if np.any(F <= 0.0):
        raise NonPositiveMetric("F <= 0 (invalid Randers data?)")
    return _single(F, y is None)


def fundamental_tensor(m, v, y=None):
    geo, s = _geom(m, v, y, 3)
    return FundamentalTensorPack(
        _single(geo.g.value, s), _single(geo.ginv.value, s), _single(geo.C.value, s), _single(geo.F.value, s)
    )


def connection(m, v, y=None):
    geo, s = _geom(m, v, y, 3)
    return ConnectionPack(_single(geo.G.value, s), _single(geo.N.value, s), _single(geo.Gamma.value, s))


def curvature(m, v, y=None):
    geo, s = _geom(m, v, y, 4)
    return CurvaturePack(
        _single(geo.P.value, s),
        _single(geo.R.value, s),
        _single(geo.Rop.value, s),
        _single(geo.L.value, s),
        _single(geo.mean_cartan.value, s),
        _single(geo.mean_landsberg.value, s),
    )


def geodesic_coefficients_christoffel(m, x, y):
    """G^i = 1/4 g^il (2 d_k g_jl - d_l g_jk) y^j y^k, kept as an independent route."""
    geo = Geometry(m, x, y, 3)
    dg = geo.dx(geo.g)  # dg[j,l,k] = d_k g_jl
    yv = geo.Yc
    t = jets.einsum("pjlk,pj,pk->pl", dg, yv, yv) * 2.0 - jets.einsum("pjkl,pj,pk->pl", dg, yv, yv)
    return (jets.einsum("pil,pl->pi", geo.ginv, t) * 0.25).value
