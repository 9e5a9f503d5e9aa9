"""Optical hypersurfaces in T*M for n = 2: fiber barycenters, the barycenter shift and the co-Finsler gauge.

The hypersurface is the level set ``h(x, p) = 1`` of a polynomial in ``p``
with trigonometric coefficients in ``x``; the enclosed fiber region is
``U_x = {h(x, .) < 1}``.  The fiber measure is the Euclidean area of the chart.
"""
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.optimize import minimize

from .errors import ConfigError, NonConvexFiber, NonStarShaped


@dataclass(frozen=True)
class HTerm:
    """``(cos * cos(k.x) + sin * sin(k.x)) * p1^a * p2^b``."""

    powers: tuple
    freq: tuple = (0, 0)
    cos: float = 0.0
    sin: float = 0.0

    def coeff(self, x):
        ph = float(np.dot(self.freq, x))
        return self.cos * np.cos(ph) + self.sin * np.sin(ph)

    def to_json(self):
        return {"powers": list(self.powers), "freq": list(self.freq), "cos": self.cos, "sin": self.sin}

    @classmethod
    def from_json(cls, d):
        try:
            pw = tuple(int(v) for v in d["powers"])
        except KeyError as e:
            raise ConfigError("h_terms entry lacks 'powers'") from e
        if len(pw) != 2 or min(pw) < 0:
            raise ConfigError("'powers' must be two non-negative integers")
        fr = tuple(int(v) for v in d.get("freq", (0, 0)))
        return cls(pw, fr, float(d.get("cos", 0.0)), float(d.get("sin", 0.0)))


def _poly(terms, x):
    """Coefficient table ``c[a, b]`` of the fiber polynomial at ``x``."""
    deg = max(max(t.powers) for t in terms)
    c = np.zeros((deg + 1, deg + 1))
    for t in terms:
        c[t.powers] += t.coeff(x)
    return c


def _shift_poly(c, q):
    """Coefficients of p -> poly(p + q)."""
    from math import comb

    d = c.shape[0]
    out = np.zeros_like(c)
    for a in range(d):
        for b in range(d):
            if c[a, b] == 0.0:
                continue
            for i in range(a + 1):
                for j in range(b + 1):
                    out[i, j] += c[a, b] * comb(a, i) * comb(b, j) * q[0] ** (a - i) * q[1] ** (b - j)
    return out


class FiberCurve:
    """The fiber polynomial at one base point, with value, gradient and Hessian in p."""

    def __init__(self, c):
        self.c = c
        d = c.shape[0]
        self.d1 = np.polynomial.polynomial.polyder(c, axis=0) if d > 1 else np.zeros((1, d))
        self.d2 = np.polynomial.polynomial.polyder(c, axis=1) if d > 1 else np.zeros((d, 1))

    def __call__(self, p):
        p = np.asarray(p, dtype=float)
        return np.polynomial.polynomial.polyval2d(p[..., 0], p[..., 1], self.c)

    def grad(self, p):
        p = np.asarray(p, dtype=float)
        P = np.polynomial.polynomial
        return np.stack([P.polyval2d(p[..., 0], p[..., 1], self.d1), P.polyval2d(p[..., 0], p[..., 1], self.d2)], -1)

    def hess(self, p):
        P = np.polynomial.polynomial
        p = np.asarray(p, dtype=float)
        h11 = P.polyder(self.d1, axis=0) if self.d1.shape[0] > 1 else np.zeros((1, 1))
        h12 = P.polyder(self.d1, axis=1) if self.d1.shape[1] > 1 else np.zeros((1, 1))
        h22 = P.polyder(self.d2, axis=1) if self.d2.shape[1] > 1 else np.zeros((1, 1))
        a = P.polyval2d(p[..., 0], p[..., 1], h11)
        b = P.polyval2d(p[..., 0], p[..., 1], h12)
        c = P.polyval2d(p[..., 0], p[..., 1], h22)
        return np.stack([np.stack([a, b], -1), np.stack([b, c], -1)], -2)

    def ray_polynomial(self, center, phis):
        """Coefficients (ascending in r) of h(center + r e(phi)) - 1, one row per angle."""
        c = _shift_poly(self.c, np.asarray(center, dtype=float))
        d = c.shape[0]
        e1, e2 = np.cos(phis), np.sin(phis)
        out = np.zeros((len(phis), 2 * d - 1))
        for a in range(d):
            for b in range(d):
                if c[a, b] != 0.0:
                    out[:, a + b] += c[a, b] * e1**a * e2**b
        out[:, 0] -= 1.0
        return out

    def radii(self, center, phis):
        """Distance from ``center`` to the level set along each angle; exactly one crossing enforced."""
        phis = np.atleast_1d(np.asarray(phis, dtype=float))
        if self(np.asarray(center, dtype=float)) >= 1.0:
            raise NonStarShaped("ray origin is not inside the fiber region")
        P = self.ray_polynomial(center, phis)
        out = np.empty(len(phis))
        nz = P != 0.0
        deg = np.where(nz.any(1), P.shape[1] - 1 - np.argmax(nz[:, ::-1], axis=1), 0)
        if deg.min() < 1:
            raise NonConvexFiber("fiber region is unbounded")
        for d in np.unique(deg):
            rows = np.nonzero(deg == d)[0]
            co = P[rows, :d + 1]
            # all roots of one degree at once, as companion-matrix eigenvalues
            comp = np.zeros((len(rows), d, d))
            comp[:, np.arange(1, d), np.arange(d - 1)] = 1.0
            comp[:, :, -1] = -co[:, :d] / co[:, d:]
            roots = np.linalg.eigvals(comp)
            for i, rts, c in zip(rows, roots, co):
                out[i] = self._crossing(rts, c)
        return out

    @staticmethod
    def _crossing(rts, co):
        scale = max(1.0, np.abs(rts).max())
        real = np.sort(rts[(np.abs(rts.imag) <= 1e-9 * scale) & (rts.real > 0)].real)
        if len(real) == 0:
            raise NonConvexFiber("fiber region is unbounded")
        # distinct crossings (a tangential double root counts once)
        crossings = real[np.concatenate([[True], np.diff(real) > 1e-7 * scale])]
        if len(crossings) > 1:
            raise NonStarShaped("ray meets the fiber curve more than once")
        r = crossings[0]
        dco = np.polynomial.polynomial.polyder(co)
        for _ in range(3):
            f = np.polynomial.polynomial.polyval(r, co)
            df = np.polynomial.polynomial.polyval(r, dco)
            if df == 0.0:
                break
            r = r - f / df
        return r

    def radius(self, center, phi):
        return float(self.radii(center, [phi])[0])


@dataclass(frozen=True)
class OpticalSpec:
    """Defining polynomial ``h`` and the fiber sampling resolution."""

    h_terms: tuple
    fiber_res: int = 512
    shift: object = field(default=None, compare=False)  # x -> covector added inside h

    def __post_init__(self):
        if not self.h_terms:
            raise ConfigError("h_terms must be non-empty")
        if self.fiber_res < 16:
            raise ConfigError("fiber_res must be at least 16")

    def fiber(self, x):
        x = np.asarray(x, dtype=float)
        c = _poly(self.h_terms, x)
        if self.shift is not None:
            c = _shift_poly(c, self.shift(x))
        return FiberCurve(c)

    def h(self, x, p):
        return float(self.fiber(x)(p))

    @classmethod
    def ellipse(cls, a=1.0, b=1.0, center=(0.0, 0.0), fiber_res=512):
        """(p1 - c1)^2 / a^2 + (p2 - c2)^2 / b^2 = 1 at every x."""
        c1, c2 = center
        t = [
            HTerm((2, 0), cos=1 / a**2),
            HTerm((0, 2), cos=1 / b**2),
            HTerm((1, 0), cos=-2 * c1 / a**2),
            HTerm((0, 1), cos=-2 * c2 / b**2),
            HTerm((0, 0), cos=c1**2 / a**2 + c2**2 / b**2),
        ]
        return cls(tuple(x for x in t if x.cos or x.sin), fiber_res)

    def to_json(self):
        if self.shift is not None:
            raise ConfigError("a shifted spec has no closed JSON form")
        return {"h_terms": [t.to_json() for t in self.h_terms], "fiber_res": self.fiber_res}

    @classmethod
    def from_json(cls, d):
        if "h_terms" not in d:
            raise ConfigError("optical spec lacks 'h_terms'")
        return cls(tuple(HTerm.from_json(t) for t in d["h_terms"]), int(d.get("fiber_res", 512)))


@dataclass(frozen=True)
class BarycenterForm:
    """Barycenters ``beta`` (rows) at base points ``x`` (rows)."""

    x: np.ndarray
    beta: np.ndarray


def _interior_point(fc):
    if fc(np.zeros(2)) < 1.0:
        return np.zeros(2)
    res = minimize(lambda p: float(fc(p)), np.zeros(2), jac=lambda p: fc.grad(p), method="BFGS")
    if res.fun >= 1.0:
        raise NonConvexFiber("fiber region is empty")
    return res.x


def _radii(fc, center, m):
    phis = 2 * np.pi * np.arange(m) / m
    return phis, fc.radii(center, phis)


def convexity(spec, x):
    """Minimum signed curvature of the fiber curve (positive for strictly convex)."""
    fc = spec.fiber(x)
    c = _interior_point(fc)
    phis, r = _radii(fc, c, spec.fiber_res)
    pts = c + r[:, None] * np.stack([np.cos(phis), np.sin(phis)], -1)
    g = fc.grad(pts)
    H = fc.hess(pts)
    ng = np.linalg.norm(g, axis=-1)
    t = np.stack([-g[:, 1], g[:, 0]], -1) / ng[:, None]
    # h increases outward, so the curvature of {h = 1} is t.H.t / |grad h|
    return float(np.min(np.einsum("pi,pij,pj->p", t, H, t) / ng))


def barycenter(spec, x):
    """Area barycenter of the fiber region by polar trapezoid quadrature."""
    fc = spec.fiber(x)
    if convexity(spec, x) <= 0.0:
        raise NonConvexFiber("fiber curve fails the curvature test")
    c = _interior_point(fc)
    m = spec.fiber_res
    for _ in range(3):
        phis, r = _radii(fc, c, m)
        e = np.stack([np.cos(phis), np.sin(phis)], -1)
        area = np.sum(r**2) / 2
        mom = np.sum((r**3)[:, None] * e, axis=0) / 3
        beta = c + mom / area
        if fc(beta) >= 1.0:
            raise NonConvexFiber("barycenter outside the fiber region")
        # recentering on the barycenter makes the radial function smoother
        if np.linalg.norm(beta - c) < 1e-14:
            break
        c = beta
    return beta


def barycenter_form(spec, xs):
    xs = np.atleast_2d(np.asarray(xs, dtype=float))
    return BarycenterForm(xs, np.array([barycenter(spec, x) for x in xs]))


def shifted(spec):
    """Spec of the shifted hypersurface ``{(x, p - beta_x)}`` whose barycenters vanish."""

    @lru_cache(maxsize=4096)
    def beta(key):
        return barycenter(spec, np.array(key))

    return OpticalSpec(spec.h_terms, spec.fiber_res, lambda x: beta(tuple(np.asarray(x, dtype=float))))


def gauge(spec, x, p):
    """Minkowski gauge ``inf{t > 0 : p / t in U_x}`` of a fiber region containing 0."""
    p = np.asarray(p, dtype=float)
    nrm = float(np.hypot(p[0], p[1]))
    if nrm == 0.0:
        return 0.0
    fc = spec.fiber(x)
    r = fc.radius(np.zeros(2), float(np.arctan2(p[1], p[0])))
    return nrm / r


def dual_quadratic(spec, x, tol=1e-9):
    """For a quadratic gauge G(p)^2 = p.A.p return ``(A, A^-1)``; A^-1 defines F on TM."""
    dirs = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
    G2 = np.array([gauge(spec, x, d) ** 2 for d in dirs])
    a11, a22 = G2[0], G2[1]
    a12 = (G2[2] - a11 - a22) / 2
    A = np.array([[a11, a12], [a12, a22]])
    for ph in np.linspace(0.1, 2 * np.pi, 7):
        d = np.array([np.cos(ph), np.sin(ph)])
        if abs(gauge(spec, x, d) ** 2 - d @ A @ d) > tol:
            raise ValueError("gauge is not quadratic; general Legendre duality is not provided")
    return A, np.linalg.inv(A)


def line_integrals(spec, curve, m=256):
    """Closed-curve integrals of the Liouville form before and after the shift.

    ``curve(s) -> (x, phi)`` for s in [0, 1] picks a base point and a
    direction; ``x(1) - x(0)`` may be a lattice vector.  The lifted point is
    the fiber curve point in direction ``phi`` seen from the barycenter.  Returns ``(int_Gamma p dx, int_BGamma p dx,
    int_{tau Gamma} beta, max |h_shift - 1| on B Gamma)``.
    """
    sh = shifted(spec)
    s = np.arange(m) / m
    xs, ps, bs = [], [], []
    for si in s:
        x, phi = curve(si)
        x = np.asarray(x, dtype=float)
        b = barycenter(spec, x)
        r = spec.fiber(x).radius(b, phi)
        xs.append(x)
        bs.append(b)
        ps.append(b + r * np.array([np.cos(phi), np.sin(phi)]))
    xs, ps, bs = np.array(xs), np.array(ps), np.array(bs)
    # curves on the torus may close up to a lattice shift; differentiate the periodic part spectrally
    drift = np.asarray(curve(1.0)[0], dtype=float) - xs[0]
    k = np.fft.fftfreq(m, 1.0 / m)
    ik = 2j * np.pi * k[:, None]
    if m % 2 == 0:
        ik[np.abs(k) == m // 2] = 0.0
    dx = drift + np.real(np.fft.ifft(ik * np.fft.fft(xs - s[:, None] * drift, axis=0), axis=0))
    q = ps - bs
    on = max(abs(sh.h(x, qq) - 1.0) for x, qq in zip(xs, q))
    w = 1.0 / m
    return (float(w * np.sum(ps * dx)), float(w * np.sum(q * dx)), float(w * np.sum(bs * dx)), float(on))
