"""Immutable metric and magnetic-system descriptions with JSON round-trip."""
from dataclasses import dataclass, field

import numpy as np

from . import jets
from .coeffs import IndexedTerm, TrigTerm, tensor_field
from .errors import ChartExit, ConfigError

KINDS = ("riemannian", "randers", "constant_curvature")


@dataclass(frozen=True)
class MetricSpec:
    """F = sigma(x) * sqrt(a(y, y)) + b(y).

    ``terms`` fill the symmetric matrix ``a_ij`` (one entry per unordered
    pair), ``b_terms`` the 1-form ``b_i``.  For ``constant_curvature`` the
    matrix is the conformal chart metric ``4|dx|^2 / (1 + K0|x|^2)^2``.
    Indices are zero-based.
    """

    kind: str
    dim: int
    terms: tuple = ()
    b_terms: tuple = ()
    K0: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown metric kind {self.kind!r}")
        if self.dim < 2:
            raise ConfigError("dim must be at least 2")
        if self.kind != "randers" and self.b_terms:
            raise ConfigError("b_terms only allowed for randers metrics")
        if self.kind == "constant_curvature" and self.terms:
            raise ConfigError("constant_curvature metrics take no terms")
        for t in self.terms + self.b_terms:
            if len(t.term.freq) != self.dim or any(i >= self.dim or i < 0 for i in t.idx):
                raise ConfigError("term index or frequency length does not match dim")

    # evaluation ----------------------------------------------------------
    @property
    def periodic(self):
        if self.kind == "constant_curvature":
            return False
        return all(t.term.periodic for t in self.terms + self.b_terms)

    def chart_check(self, x):
        if self.kind == "constant_curvature" and self.K0 < 0:
            r2 = np.sum(np.asarray(x) ** 2, axis=-1)
            if np.any(r2 * abs(self.K0) >= 1.0):
                raise ChartExit("point outside the disk chart")

    def a(self, x):
        n = self.dim
        if self.kind == "constant_curvature":
            eye = np.eye(n)
            if self.K0 == 0.0:
                if isinstance(x, jets.Jet):
                    return jets.Jet.constant(x.space, np.broadcast_to(eye, x.shape[:-1] + (n, n)), x.k)
                return np.broadcast_to(eye, np.shape(x)[:-1] + (n, n)).copy()
            if isinstance(x, jets.Jet):
                r2 = jets.einsum("pi,pi->p", x, x)
                s2 = (r2 * self.K0 + 1.0) ** -2 * 4.0
                return s2.expand(-1).expand(-1) * eye
            r2 = np.sum(np.asarray(x) ** 2, axis=-1)
            s2 = 4.0 / (1.0 + self.K0 * r2) ** 2
            return s2[..., None, None] * eye
        return tensor_field(self.terms, x, n, 2, symmetric=True)

    def b(self, x):
        return tensor_field(self.b_terms, x, self.dim, 1)

    def F(self, x, y):
        """Plain-array evaluation of F."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        a = self.a(x)
        al = np.sqrt(np.einsum("...ij,...i,...j->...", a, y, y))
        if self.kind == "randers":
            al = al + np.einsum("...i,...i->...", self.b(x), y)
        return al

    # construction --------------------------------------------------------
    @classmethod
    def euclidean(cls, n=2):
        return cls("constant_curvature", n, K0=0.0)

    @classmethod
    def poincare_disk(cls, K0=-1.0, n=2):
        return cls("constant_curvature", n, K0=K0)

    @classmethod
    def flat_torus(cls, n=2):
        return cls("riemannian", n, tuple(IndexedTerm((i, i), TrigTerm((0,) * n, 1.0)) for i in range(n)))

    def to_json(self):
        return {
            "kind": self.kind,
            "dim": self.dim,
            "terms": [t.to_json() for t in self.terms],
            "b_terms": [t.to_json() for t in self.b_terms],
            "K0": self.K0,
        }

    @classmethod
    def from_json(cls, d):
        try:
            return cls(
                d["kind"],
                int(d["dim"]),
                tuple(IndexedTerm.from_json(t, 2) for t in d.get("terms", [])),
                tuple(IndexedTerm.from_json(t, 1) for t in d.get("b_terms", [])),
                float(d.get("K0", 0.0)),
            )
        except KeyError as e:
            raise ConfigError(f"metric: missing key {e.args[0]!r}") from None


@dataclass(frozen=True)
class MagneticSystem:
    """Metric plus closed 2-form ``Omega = strength * (sum of terms + area_form * vol_a)``.

    ``omega_terms`` give ``Omega_ij`` for the listed (i, j); the mirror
    entry gets the opposite sign.  ``area_form`` adds a multiple of the
    area form of ``a`` (surfaces only).  ``primitive_terms``, when not
    ``None``, describe a 1-form with d(beta) = Omega (before scaling).
    """

    metric: MetricSpec
    omega_terms: tuple = ()
    area_form: float = 0.0
    primitive_terms: tuple = None
    strength: float = 1.0

    def __post_init__(self):
        n = self.metric.dim
        for t in self.omega_terms:
            if t.idx[0] == t.idx[1]:
                raise ConfigError("Omega terms must be off-diagonal")
            if len(t.term.freq) != n or max(t.idx) >= n:
                raise ConfigError("Omega term does not match dim")
        if self.area_form and n != 2:
            raise ConfigError("area_form requires dim 2")

    @property
    def dim(self):
        return self.metric.dim

    @property
    def has_field(self):
        return bool(self.strength) and (bool(self.omega_terms) or bool(self.area_form))

    @property
    def exact(self):
        return self.primitive_terms is not None

    def Omega(self, x):
        n = self.dim
        om = tensor_field(self.omega_terms, x, n, 2, antisymmetric=True)
        if self.area_form:
            a = self.metric.a(x)
            if isinstance(x, jets.Jet):
                det = a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]
                vol = jets.sqrt(det) * self.area_form
                eps = np.array([[0.0, 1.0], [-1.0, 0.0]])
                om = om + vol.expand(-1).expand(-1) * eps
            else:
                vol = self.area_form * np.sqrt(np.linalg.det(a))
                om = om + vol[..., None, None] * np.array([[0.0, 1.0], [-1.0, 0.0]])
        return om * self.strength

    def beta(self, x):
        if self.primitive_terms is None:
            raise ValueError("no primitive")
        return tensor_field(self.primitive_terms, x, self.dim, 1) * self.strength

    def check_closed(self, xs, tol=1e-9):
        """Max of |dOmega| and, when present, |d beta - Omega| at sample points."""
        n = self.dim
        xj = jets.seed(xs, 1)
        om = self.Omega(xj)
        d = om.grad(range(n)).value  # d[p, i, j, k] = dk Omega_ij
        err = 0.0
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    err = max(err, float(np.abs(d[:, i, j, k] + d[:, j, k, i] + d[:, k, i, j]).max()))
        perr = 0.0
        if self.exact:
            db = self.beta(xj).grad(range(n)).value  # db[p, j, i] = di beta_j
            curl = np.swapaxes(db, 1, 2) - db
            perr = float(np.abs(curl - om.value).max())
        return err, perr

    def with_strength(self, s):
        return MagneticSystem(self.metric, self.omega_terms, self.area_form, self.primitive_terms, s)

    def without_field(self):
        return MagneticSystem(self.metric)

    def to_json(self):
        d = {
            "metric": self.metric.to_json(),
            "omega_terms": [t.to_json() for t in self.omega_terms],
            "area_form": self.area_form,
            "strength": self.strength,
        }
        if self.primitive_terms is not None:
            d["primitive_terms"] = [t.to_json() for t in self.primitive_terms]
        return d

    @classmethod
    def from_json(cls, d):
        if "metric" not in d:
            raise ConfigError("system: missing key 'metric'")
        prim = d.get("primitive_terms")
        return cls(
            MetricSpec.from_json(d["metric"]),
            tuple(IndexedTerm.from_json(t, 2) for t in d.get("omega_terms", [])),
            float(d.get("area_form", 0.0)),
            None if prim is None else tuple(IndexedTerm.from_json(t, 1) for t in prim),
            float(d.get("strength", 1.0)),
        )


@dataclass(frozen=True)
class Point:
    x: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1 or x.size < 2 or not np.all(np.isfinite(x)):
            raise ValueError("Point needs a finite vector of length >= 2")
        object.__setattr__(self, "x", x)


@dataclass(frozen=True)
class TangentVector:
    base: Point
    y: np.ndarray = field(default=None)

    def __post_init__(self):
        if not isinstance(self.base, Point):
            object.__setattr__(self, "base", Point(self.base))
        y = np.asarray(self.y, dtype=float)
        if y.shape != self.base.x.shape:
            raise ValueError("fiber vector must match the base dimension")
        if not np.any(y):
            raise ValueError("y must be nonzero")
        object.__setattr__(self, "y", y)

    @property
    def x(self):
        return self.base.x


def as_batch(v, y=None):
    """Normalize TangentVector / arrays into ``(N, n)`` x and y arrays."""
    if isinstance(v, TangentVector):
        return v.x[None, :], v.y[None, :]
    x = np.atleast_2d(np.asarray(v, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    return x, y
