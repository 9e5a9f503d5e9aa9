"""Magnetic Jacobi fields, the index form, Hill-type positivity scans and Lyapunov exponents."""
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh

from . import jets
from .errors import NotPeriodic
from .finsler import Geometry
from .integrators import dopri5
from .magnetic import Flow, Trajectory, _state, integrate
from .semibasic import horiz, vert
from .surface import Frame2D

E = jets.einsum


def _start(orbit):
    if isinstance(orbit, Trajectory):
        return np.concatenate([orbit.x[0], orbit.y[0]]), float(orbit.t[-1] - orbit.t[0])
    return _state(orbit), None


# 2D scalar equation ----------------------------------------------------------


def Q_along(sys, z):
    """Q at states ``z`` of shape ``(N, 4)``."""
    z = np.atleast_2d(z)
    geo = Geometry(sys, z[:, :2], z[:, 2:], 5)
    return Frame2D(geo).Q.value


def jacobi_2d(sys, orbit, init, T=None, t_eval=None, tol=1e-10):
    """Solve y'' + Q y = 0 along the magnetic geodesic starting at ``orbit``.

    Returns ``(t, y, ydot)``.
    """
    if sys.dim != 2:
        raise ValueError("the scalar Jacobi equation needs dimension 2")
    z0, Tt = _start(orbit)
    T = Tt if T is None else T
    flow = Flow(sys)

    def f(t, s):
        z = s[:4]
        q = Q_along(sys, z)[0]
        return np.concatenate([flow.rhs(z), [s[5], -q * s[4]]])

    def proj(s):
        s = s.copy()
        s[:4] = flow.project(s[:4])
        return s

    s0 = np.concatenate([z0, np.asarray(init, dtype=float)])
    ts, ss, _ = dopri5(f, 0.0, s0, T, tol, t_eval=t_eval, project=proj)
    return ts, ss[:, 4], ss[:, 5]


# n-D covariant equation -------------------------------------------------------


class JacobiCoefficients:
    """Tensors along the orbit entering the covariant Jacobi equation."""

    def __init__(self, sys, z):
        z = np.atleast_2d(z)
        n = sys.dim
        geo = Geometry(sys, z[:, :n], z[:, n:], 4)
        self.geo = geo
        self.g = geo.g.value
        self.N = geo.N.value
        self.R = geo.Rop.value
        self.Y = geo.Y.value
        self.Yv = vert(geo, geo.Y).value  # Y^i_{j.k}
        self.Yh = horiz(geo, geo.Y, "ud").value  # Y^i_{j|k}
        self.L = geo.L.value
        self.ginv = geo.ginv.value
        self.T = z[:, n:]

    def second(self, U, W):
        """D_T D_T U = -R(U) + Y(W) + (nabla_|U Y)(T) + (nabla_.W Y)(T) + L(U, Y(T))."""
        T = self.T
        YT = np.einsum("pij,pj->pi", self.Y, T)
        return (
            -np.einsum("pik,pk->pi", self.R, U)
            + np.einsum("pij,pj->pi", self.Y, W)
            + np.einsum("pijk,pj,pk->pi", self.Yh, T, U)
            + np.einsum("pijk,pj,pk->pi", self.Yv, T, W)
            + np.einsum("pic,pabc,pa,pb->pi", self.ginv, self.L, U, YT)
        )


@dataclass
class JacobiFieldND:
    t: np.ndarray
    Z: np.ndarray
    Zdot: np.ndarray  # covariant derivative D_T Z
    orbit: np.ndarray


def jacobi_operator(sys, z, U, dU, ddU):
    """Residual D_T D_T U - (right-hand side) for chart data U, dU/dt, d2U/dt2 along states ``z``."""
    z = np.atleast_2d(z)
    c = JacobiCoefficients(sys, z)
    f = Flow(sys).rhs(z)
    Nj = c.geo.N.trunc(1)
    dN = np.einsum("kpij,pk->pij", Nj.c[1:], f)
    N = c.N
    W = dU + np.einsum("pij,pj->pi", N, U)
    dW = ddU + np.einsum("pij,pj->pi", dN, U) + np.einsum("pij,pj->pi", N, dU)
    DW = dW + np.einsum("pij,pj->pi", N, W)
    return DW - c.second(U, W)


def jacobi_nd(sys, orbit, init, T=None, t_eval=None, tol=1e-11):
    """Integrate the covariant magnetic Jacobi equation for (Z, D_T Z)."""
    z0, Tt = _start(orbit)
    T = Tt if T is None else T
    n = sys.dim
    d = 2 * n
    flow = Flow(sys)
    U0, W0 = (np.asarray(a, dtype=float) for a in init)

    def f(t, s):
        z = s[:d]
        c = JacobiCoefficients(sys, z)
        U = s[d:d + n][None]
        W = s[d + n:][None]
        N = c.N
        Ud = W - np.einsum("pij,pj->pi", N, U)
        Wd = c.second(U, W) - np.einsum("pij,pj->pi", N, W)
        return np.concatenate([flow.rhs(z), Ud[0], Wd[0]])

    def proj(s):
        s = s.copy()
        s[:d] = flow.project(s[:d])
        return s

    s0 = np.concatenate([z0, U0, W0])
    ts, ss, _ = dopri5(f, 0.0, s0, T, tol, t_eval=t_eval, project=proj, error_slice=slice(0, d + 2 * n))
    return JacobiFieldND(ts, ss[:, d:d + n], ss[:, d + n:], ss[:, :d])


def lagrangian_pairing(sys, orbit_states, J1, W1, J2, W2):
    """<J1, W2> - <W1, J2> + <Y(J1), J2> along the orbit (g at the velocity)."""
    n = sys.dim
    z = np.atleast_2d(orbit_states)
    geo = Geometry(sys, z[:, :n], z[:, n:], 2)
    g = geo.g.value
    Y = geo.Y.value
    YJ1 = np.einsum("pij,pj->pi", Y, J1)
    ip = lambda a, b: np.einsum("pij,pi,pj->p", g, a, b)
    return ip(J1, W2) - ip(W1, J2) + ip(YJ1, J2)


def frame_decomposition(sys, z, xi):
    """Coefficients (x, y, z) of tangent vectors ``xi`` in the frame (G_M, H, V)."""
    z = np.atleast_2d(z)
    geo = Geometry(sys, z[:, :2], z[:, 2:], 3)
    fr = Frame2D(geo)
    M = np.stack([fr.GM.value, fr.H.value, fr.V.value, fr.radial.value], -1)
    return np.linalg.solve(M, np.atleast_2d(xi)[..., None])[..., 0]


def frame_system_2d(sys, orbit, init, T, t_eval=None, tol=1e-11):
    """Integrate x' = lam y, y' = z + lam I y, z' = -lam I z - Kbb y along the orbit."""
    z0, _ = _start(orbit)
    flow = Flow(sys)

    def f(t, s):
        zz = s[:4]
        geo = Geometry(sys, zz[None, :2], zz[None, 2:], 4)
        fr = Frame2D(geo)
        lam, I, K = fr.lam.value[0], fr.I.value[0], fr.Kbb.value[0]
        a, b, c = s[4:]
        return np.concatenate([flow.rhs(zz), [lam * b, c + lam * I * b, -lam * I * c - K * b]])

    def proj(s):
        s = s.copy()
        s[:4] = flow.project(s[:4])
        return s

    s0 = np.concatenate([z0, np.asarray(init, dtype=float)])
    ts, ss, _ = dopri5(f, 0.0, s0, T, tol, t_eval=t_eval, project=proj)
    return ts, ss[:, 4:], ss[:, :4]


# index form ---------------------------------------------------------------------


@dataclass
class QProfile:
    """Periodic potential Q(t) = sum c_k cos(2 pi k t / T) + s_k sin(2 pi k t / T)."""

    T: float
    terms: tuple = ()

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        w = 2 * np.pi / self.T
        out = np.zeros_like(t)
        for k, c, s in self.terms:
            out = out + c * np.cos(k * w * t) + s * np.sin(k * w * t)
        return out

    @classmethod
    def constant(cls, q, T=2 * np.pi):
        return cls(T, ((0, q, 0.0),))

    @property
    def max_freq(self):
        return max((abs(k) for k, _, _ in self.terms), default=0)

    def to_json(self):
        return {"T": self.T, "terms": [{"k": k, "cos": c, "sin": s} for k, c, s in self.terms]}

    @classmethod
    def from_json(cls, d):
        return cls(float(d["T"]), tuple((int(t["k"]), float(t.get("cos", 0.0)), float(t.get("sin", 0.0)))
                                        for t in d.get("terms", [])))


@dataclass
class IndexFormResult:
    value: float
    decomposition: dict = field(default_factory=dict)
    orthogonality: dict = field(default_factory=dict)


def index_form_profile(profile, z, zdot, m=None):
    """Scalar index form  int_0^T (z'^2 - Q z^2) dt  by periodic trapezoid quadrature."""
    m = m or 64
    last = None
    while True:
        t = np.arange(m) * profile.T / m
        val = profile.T / m * np.sum(zdot(t) ** 2 - profile(t) * z(t) ** 2)
        if last is not None and abs(val - last) <= 1e-12 * max(1.0, abs(val)):
            return IndexFormResult(float(val), {"zdot_sq": float(profile.T / m * np.sum(zdot(t) ** 2)),
                                                "Q_z_sq": float(profile.T / m * np.sum(profile(t) * z(t) ** 2))})
        last = val
        m *= 2
        if m > 1 << 16:
            return IndexFormResult(float(val))


def chart_field(Zfun):
    """Field along the orbit given in chart components: ``Zfun(t) -> (Z, dZ/dt)``."""

    def build(t, states, geo):
        Z, dZ = Zfun(t)
        return np.atleast_2d(Z), np.atleast_2d(dZ)

    return build


def normal_field(zfun, zdotfun):
    """Z = z(t) n(t) on surfaces, n the unit normal (base part of H)."""

    def build(t, states, geo):
        Hj = Frame2D(geo).H.trunc(1)
        f = Flow(geo.system).rhs(states)
        nvec = Hj.value[:, :2]
        dn = np.einsum("kpa,pk->pa", Hj.c[1:, :, :2], f)
        zt, zd = np.asarray(zfun(t)), np.asarray(zdotfun(t))
        return zt[:, None] * nvec, zd[:, None] * nvec + zt[:, None] * dn

    return build


def index_form(sys, orbit, Z, m=64, tol=1e-8, l_sign=-1.0):
    """Index form of the periodic field Z along the closed orbit.

    ``Z(t, states, geo) -> (Z, dZ/dt)`` in chart components; see
    :func:`chart_field` and :func:`normal_field`.  The covariant derivative
    is D_T Z = dZ/dt + N(T) Z.  The Landsberg slot holds
    ``l_sign * int L(Y(T), Z, Z)``; ``l_sign=+1`` is the printed form and
    ``-1`` the sign for which the form is the second variation.  With ``sys`` a QProfile, ``orbit`` is ignored
    and ``Z`` is a pair of callables ``(z, zdot)`` for the scalar form.
    """
    if isinstance(sys, QProfile):
        return index_form_profile(sys, *Z)
    n = sys.dim
    T = orbit.T
    z0 = np.concatenate([orbit.initial.x, orbit.initial.y])
    last = None
    while True:
        t = np.arange(m + 1) * T / m
        tr = integrate(sys, z0, T, tol=1e-12, t_eval=t)
        states = tr.states()
        geo = Geometry(sys, states[:, :n], states[:, n:], 4)
        c = JacobiCoefficients(sys, states)
        Zv, dZ = Z(t, states, geo)
        Zv = np.broadcast_to(Zv, states[:, :n].shape)
        dZ = np.broadcast_to(dZ, states[:, :n].shape)
        Zd = dZ + np.einsum("pij,pj->pi", c.N, Zv)
        if last is None:
            # chart components must close up (orbit closes up to a lattice shift)
            if np.abs(Zv[0] - Zv[-1]).max() > tol or np.abs(Zd[0] - Zd[-1]).max() > tol:
                raise NotPeriodic("Z(0) != Z(T) or Zdot(0) != Zdot(T)")
        g = c.g
        Tv = c.T
        YT = np.einsum("pij,pj->pi", c.Y, Tv)
        CZ = (
            np.einsum("pik,pk->pi", c.R, Zv)
            - np.einsum("pij,pj->pi", c.Y, Zd)
            - np.einsum("pijk,pj,pk->pi", c.Yh, Tv, Zv)
        )
        ip = lambda a, b: np.einsum("pij,pi,pj->p", g, a, b)
        parts = {
            "Zdot_sq": ip(Zd, Zd),
            "C": ip(CZ, Zv),
            "L": l_sign * np.einsum("pijk,pi,pj,pk->p", c.L, YT, Zv, Zv),
            "YZ_sq": ip(YT, Zv) ** 2,
        }
        quad = {k: float(T / m * np.sum(v[:-1])) for k, v in parts.items()}
        val = quad["Zdot_sq"] - quad["C"] - quad["L"] - quad["YZ_sq"]
        if last is not None and abs(val - last) <= 1e-10 * max(1.0, abs(val)):
            break
        last = val
        m *= 2
        if m > 4096:
            break
    dots = ip(Zv, Tv)
    return IndexFormResult(val, quad, {"max_abs_Z_dot_T": float(np.abs(dots).max())})


def _trig_basis(T, m, t):
    w = 2 * np.pi / T
    phi = [np.ones_like(t)]
    dphi = [np.zeros_like(t)]
    k = 1
    while len(phi) < m:
        phi.append(np.cos(k * w * t))
        dphi.append(-k * w * np.sin(k * w * t))
        if len(phi) < m:
            phi.append(np.sin(k * w * t))
            dphi.append(k * w * np.cos(k * w * t))
        k += 1
    return np.array(phi), np.array(dphi)


def index_positivity_scan(profile, m=16):
    """Minimum Rayleigh quotient of  int (z'^2 - Q z^2) / int z^2  over an m-dim trig space."""
    if m > 64:
        raise ValueError("basis size is limited to 64")
    npts = 4 * (m + 2 * profile.max_freq) + 16
    t = np.arange(npts) * profile.T / npts
    phi, dphi = _trig_basis(profile.T, m, t)
    w = profile.T / npts
    A = w * (dphi @ dphi.T - (phi * profile(t)) @ phi.T)
    M = w * (phi @ phi.T)
    ev = eigh(A, M, eigvals_only=True)
    return float(ev[0])


# Lyapunov exponents ------------------------------------------------------------


def _disk_recenter(sys, z, W):
    """Move the base point to the origin by a disk isometry; transform tangent vectors."""
    c = np.sqrt(abs(sys.metric.K0))
    a = complex(z[0], z[1]) * c
    xi = complex(z[0], z[1]) * c
    yi = complex(z[2], z[3])
    den = 1 - np.conj(a) * xi
    d1 = (1 - abs(a) ** 2) / den**2
    d2 = 2 * np.conj(a) * (1 - abs(a) ** 2) / den**3
    znew = np.array([0.0, 0.0, (d1 * yi).real, (d1 * yi).imag])
    Wn = np.empty_like(W)
    for j in range(W.shape[1]):
        dx = complex(W[0, j], W[1, j])
        dy = complex(W[2, j], W[3, j])
        ndx = d1 * dx
        ndy = c * d2 * dx * yi + d1 * dy
        Wn[:, j] = [ndx.real, ndx.imag, ndy.real, ndy.imag]
    return znew, Wn


def _recenter_ok(sys):
    m = sys.metric
    if m.kind != "constant_curvature" or m.K0 >= 0 or sys.dim != 2:
        return False
    return not sys.omega_terms


@dataclass
class LyapunovResult:
    exponent: float
    trace: list
    T_total: float


def lyapunov(sys, start, T_total, dt=1.0, k=1, seed=0, tol=1e-9):
    """Top Lyapunov exponent by QR renormalization every ``dt``.

    The estimate is the least-squares slope of the accumulated log growth over
    the second half of the run.  Disk charts are recentred by isometries.
    """
    if T_total < 50:
        raise ValueError("T_total must be at least 50")
    flow = Flow(sys)
    d = 2 * sys.dim
    z = flow.project(_state(start))
    rng = np.random.default_rng(seed)
    W, _ = np.linalg.qr(rng.normal(size=(d, k)))
    recenter = _recenter_ok(sys)
    nsteps = int(round(T_total / dt))
    cum = np.zeros(k)
    times, growth = [0.0], [0.0]
    trace = []
    for i in range(nsteps):
        if recenter and np.hypot(z[0], z[1]) > 0.5:
            z, W = _disk_recenter(sys, z, W)
        from .magnetic import propagate

        _, zs, Ws, _ = propagate(sys, z, dt, tol=tol, t_eval=[dt], vectors=W)
        z = zs[-1]
        q, r = np.linalg.qr(Ws[-1])
        sgn = np.sign(np.diag(r))
        sgn[sgn == 0] = 1.0
        W = q * sgn
        cum += np.log(np.abs(np.diag(r)))
        t = (i + 1) * dt
        times.append(t)
        growth.append(cum[0])
        trace.append((t, cum[0] / t))
    times = np.array(times)
    growth = np.array(growth)
    half = len(times) // 2
    slope = np.polyfit(times[half:], growth[half:], 1)[0]
    return LyapunovResult(float(slope), trace, float(T_total))
