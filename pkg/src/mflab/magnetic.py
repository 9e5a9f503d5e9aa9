"""Lorentz force, magnetic geodesics, closed orbits and their action."""
from dataclasses import dataclass, field

import numpy as np

from . import jets
from .errors import DegenerateSection, MissingPrimitive, NoConvergence
from .finsler import Geometry
from .integrators import dopri5
from .semibasic import horiz, vert
from .specs import MagneticSystem, TangentVector, as_batch


@dataclass(frozen=True)
class LorentzForce:
    Y: np.ndarray
    Y_vertical: np.ndarray  # Y^i_{j.k}
    Y_horizontal: np.ndarray  # Y^i_{j|k}


def lorentz_force(sys, v, y=None):
    x, yy = as_batch(v, y)
    geo = Geometry(sys, x, yy, 3)
    out = LorentzForce(geo.Y.value, vert(geo, geo.Y).value, horiz(geo, geo.Y, "ud").value)
    if y is None:
        return LorentzForce(out.Y[0], out.Y_vertical[0], out.Y_horizontal[0])
    return out


class Flow:
    """Right-hand side of the magnetic geodesic equation on TM in (x, y)."""

    def __init__(self, sys):
        if not isinstance(sys, MagneticSystem):
            sys = MagneticSystem(sys)
        self.sys = sys
        self.n = sys.dim

    def _jet_rhs(self, z, order):
        n = self.n
        z = np.atleast_2d(z)
        geo = Geometry(self.sys, z[:, :n], z[:, n:], order)
        acc = geo.G * -2.0
        if self.sys.has_field:
            acc = acc + geo.Yy
        return jets.stack([geo.Yc[:, i] for i in range(n)] + [acc[:, i] for i in range(n)], -1)

    def rhs(self, z):
        """Vector field at states ``z`` of shape ``(2n,)`` or ``(N, 2n)``."""
        z = np.asarray(z, dtype=float)
        out = self._jet_rhs(z, 2).value
        return out[0] if z.ndim == 1 else out

    def rhs_jac(self, z):
        """Vector field and its Jacobian ``D[i, j] = d f_i / d z_j``."""
        z = np.asarray(z, dtype=float)
        J = self._jet_rhs(z, 3).trunc(1)
        f = J.value
        D = np.moveaxis(J.c[1:], 0, -1)
        if z.ndim == 1:
            return f[0], D[0]
        return f, D

    def project(self, z):
        """Rescale the fiber part back to F = 1."""
        n = self.n
        z = z.copy()
        F = self.sys.metric.F(z[None, :n], z[None, n:2 * n])[0]
        z[n:2 * n] /= F
        return z

    def F(self, z):
        z = np.atleast_2d(z)
        return self.sys.metric.F(z[:, : self.n], z[:, self.n: 2 * self.n])


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    stats: dict = field(default_factory=dict)

    @property
    def samples(self):
        return list(zip(self.t, self.x, self.y))

    def states(self):
        return np.concatenate([self.x, self.y], axis=1)

    def to_csv_rows(self):
        return np.column_stack([self.t, self.x, self.y])


def _state(start):
    if isinstance(start, TangentVector):
        return np.concatenate([start.x, start.y])
    return np.asarray(start, dtype=float)


def integrate(sys, start, T, tol=1e-10, t_eval=None, project=True):
    """Integrate the magnetic geodesic through ``start`` (on SM) for time ``T``."""
    if not 1e-12 <= tol <= 1e-4:
        raise ValueError("tol must lie in [1e-12, 1e-4]")
    flow = Flow(sys)
    z0 = _state(start)
    ts, zs, stats = dopri5(lambda t, z: flow.rhs(z), 0.0, z0, T, tol, t_eval=t_eval,
                           project=flow.project if project else None)
    n = flow.n
    drift = float(np.abs(flow.F(zs) - 1.0).max())
    stats = dict(stats, F_drift=drift)
    return Trajectory(ts, zs[:, :n], zs[:, n:], stats)


def propagate(sys, z0, T, tol=1e-11, t_eval=None, vectors=None):
    """Flow together with its linearization applied to ``vectors`` (columns).

    Returns times, base states ``(M, 2n)`` and tangent states ``(M, 2n, k)``.
    """
    flow = Flow(sys)
    d = 2 * flow.n
    W0 = np.eye(d) if vectors is None else np.asarray(vectors, dtype=float).reshape(d, -1)
    k = W0.shape[1]

    def f(t, s):
        z = s[:d]
        fz, D = flow.rhs_jac(z)
        W = s[d:].reshape(d, k)
        return np.concatenate([fz, (D @ W).ravel()])

    def proj(s):
        s = s.copy()
        s[:d] = flow.project(s[:d])
        return s

    s0 = np.concatenate([np.asarray(z0, dtype=float), W0.ravel()])
    ts, ss, stats = dopri5(f, 0.0, s0, T, tol, t_eval=t_eval, project=proj, error_slice=slice(0, d))
    return ts, ss[:, :d], ss[:, d:].reshape(len(ts), d, k), stats


@dataclass
class ClosedOrbit:
    initial: TangentVector
    T: float
    closure_residual: float
    action: float = None
    lattice_shift: np.ndarray = None

    def to_json(self):
        return {
            "initial": {"x": self.initial.x.tolist(), "y": self.initial.y.tolist()},
            "T": self.T,
            "residual": self.closure_residual,
            "action": self.action,
        }


def _closure(sys, z0, zT):
    n = sys.dim
    d = zT - z0
    shift = np.zeros(n)
    if sys.metric.periodic:
        shift = 2 * np.pi * np.round(d[:n] / (2 * np.pi))
        d[:n] -= shift
    return d, shift


def find_closed_orbit(sys, seed, T_guess, tol=1e-10, max_iter=40, T_min=0.1):
    """Newton shooting for a periodic orbit near ``seed`` with period near ``T_guess``.

    Unknowns are the initial state and the period; equations are closure
    (modulo the period lattice on tori), a phase condition orthogonal to the
    flow at the seed, and the energy constraint F = 1.
    """
    flow = Flow(sys)
    n = flow.n
    d = 2 * n
    z_seed = flow.project(_state(seed))
    f_seed = flow.rhs(z_seed)
    z, T = z_seed.copy(), float(T_guess)
    best = np.inf
    stall = 0
    for _ in range(max_iter):
        if T < T_min:
            raise NoConvergence("period collapsed below the minimum")
        ts, zs, Ws, _ = propagate(sys, z, T, tol=1e-12, t_eval=[T])
        zT, Phi = zs[-1], Ws[-1]
        r, _ = _closure(sys, z, zT.copy())
        res = float(np.abs(r).max())
        if res <= tol:
            break
        fT = flow.rhs(zT)
        Fz, gradF = _F_grad(sys, z)
        A = np.zeros((d + 2, d + 1))
        A[:d, :d] = Phi - np.eye(d)
        A[:d, d] = fT
        A[d, :d] = f_seed
        A[d + 1, :d] = gradF
        b = -np.concatenate([r, [f_seed @ (z - z_seed), Fz - 1.0]])
        sv = np.linalg.svd(A, compute_uv=False)
        step, *_ = np.linalg.lstsq(A, b, rcond=1e-12)
        z = flow.project(z + step[:d])
        T = T + step[d]
        if res < 0.5 * best:
            best, stall = res, 0
        else:
            stall += 1
            if stall >= 8:
                if sv[-1] < 1e-10 * sv[0]:
                    raise DegenerateSection("section Jacobian singular and Newton stalled")
                raise NoConvergence("Newton iteration stalled")
    else:
        raise NoConvergence("maximum Newton iterations reached")
    if T < T_min:
        raise NoConvergence("period collapsed below the minimum")
    # final closure check at the tightest tolerance
    tr = integrate(sys, z, T, tol=1e-12, t_eval=[T])
    zT = np.concatenate([tr.x[-1], tr.y[-1]])
    r, shift = _closure(sys, z, zT.copy())
    res = float(np.abs(r).max())
    return ClosedOrbit(TangentVector(z[:n], z[n:]), float(T), res, None, shift)


def _F_grad(sys, z):
    n = sys.dim
    zj = jets.seed(z[None, :], 1)
    m = sys.metric
    a = m.a(zj[:, :n])
    y = zj[:, n:]
    F = jets.sqrt(jets.einsum("pij,pi,pj->p", a, y, y))
    if m.kind == "randers":
        F = F + jets.einsum("pi,pi->p", m.b(zj[:, :n]), y)
    return float(F.value[0]), F.c[1:, 0].copy()


def action(sys, orbit, tol=1e-12):
    """Real-valued action  int g_ij y^i dx^j - int beta  of a closed orbit (exact Omega)."""
    if not sys.exact:
        raise MissingPrimitive("the action needs a primitive of Omega")
    flow = Flow(sys)
    n = flow.n
    d = 2 * n

    def f(t, s):
        z = s[:d]
        x, y = z[None, :n], z[None, n:]
        # the Liouville form on the generator: g_ij y^i y^j
        lam = float(y[0] @ _g0(sys, x, y) @ y[0])
        beta = float(sys.beta(x)[0] @ y[0]) if sys.primitive_terms else 0.0
        return np.concatenate([flow.rhs(z), [lam, beta]])

    def proj(s):
        s = s.copy()
        s[:d] = flow.project(s[:d])
        return s

    z0 = np.concatenate([orbit.initial.x, orbit.initial.y, [0.0, 0.0]])
    _, ss, _ = dopri5(f, 0.0, z0, orbit.T, tol, project=proj)
    return float(ss[-1, d] - ss[-1, d + 1])


def _g0(sys, x, y):
    geo = Geometry(sys, x, y, 2)
    return geo.g.value[0]
