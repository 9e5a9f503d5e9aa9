"""Coefficient functions: trigonometric polynomials with optional monomial factors.

A term is ``x^pow * (cos_amp * cos(freq . x) + sin_amp * sin(freq . x))``.
With ``pow`` all zero the term is 2pi-periodic in every coordinate whenever
the frequencies are integers.  Terms evaluate either on plain arrays or on
jets of the base coordinates.
"""
from dataclasses import dataclass, field

import numpy as np

from . import jets


@dataclass(frozen=True)
class TrigTerm:
    freq: tuple
    cos: float = 0.0
    sin: float = 0.0
    pow: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "freq", tuple(float(f) for f in self.freq))
        object.__setattr__(self, "cos", float(self.cos))
        object.__setattr__(self, "sin", float(self.sin))
        p = tuple(int(q) for q in self.pow) if self.pow else (0,) * len(self.freq)
        if len(p) != len(self.freq) or min(p) < 0:
            raise ValueError("pow must be a non-negative integer vector matching freq")
        object.__setattr__(self, "pow", p)

    @property
    def periodic(self):
        return not any(self.pow) and all(float(f).is_integer() for f in self.freq)

    def to_json(self):
        d = {"freq": list(self.freq), "cos": self.cos, "sin": self.sin}
        if any(self.pow):
            d["pow"] = list(self.pow)
        return d

    @classmethod
    def from_json(cls, d):
        return cls(tuple(d["freq"]), d.get("cos", 0.0), d.get("sin", 0.0), tuple(d.get("pow", ())))

    def __call__(self, x):
        """Evaluate on an ``(N, n)`` array or a jet with trailing axis ``n``."""
        freq = np.array(self.freq)
        if isinstance(x, jets.Jet):
            n = x.shape[-1]
            out = None
            if np.any(freq):
                ph = jets.einsum("pi,i->p", x, freq)
                out = 0.0
                if self.cos:
                    out = jets.cos(ph) * self.cos + out
                if self.sin:
                    out = jets.sin(ph) * self.sin + out
                if not isinstance(out, jets.Jet):
                    out = jets.Jet.constant(x.space, np.zeros(x.shape[:-1]), x.k)
            else:
                out = jets.Jet.constant(x.space, np.full(x.shape[:-1], self.cos), x.k)
            for i in range(n):
                for _ in range(self.pow[i]):
                    out = out * x[..., i]
            return out
        x = np.asarray(x, dtype=float)
        ph = x @ freq
        out = self.cos * np.cos(ph) + self.sin * np.sin(ph)
        for i, p in enumerate(self.pow):
            if p:
                out = out * x[..., i] ** p
        return out


def eval_terms(terms, x, zero_shape=None):
    """Sum of terms; returns a zero of the right kind when ``terms`` is empty."""
    out = None
    for t in terms:
        v = t(x)
        out = v if out is None else out + v
    if out is None:
        if isinstance(x, jets.Jet):
            return jets.Jet.constant(x.space, np.zeros(x.shape[:-1]), x.k)
        return np.zeros(np.asarray(x).shape[:-1])
    return out


@dataclass(frozen=True)
class IndexedTerm:
    """A trigonometric term placed at tensor index ``idx``."""

    idx: tuple
    term: TrigTerm

    def to_json(self):
        d = self.term.to_json()
        for name, i in zip("ij", self.idx):
            d[name] = i
        return d

    @classmethod
    def from_json(cls, d, rank):
        idx = tuple(int(d[name]) for name in "ij"[:rank])
        return cls(idx, TrigTerm.from_json(d))


def tensor_field(terms, x, n, rank, symmetric=False, antisymmetric=False):
    """Assemble an ``(N, n[, n])`` field from indexed terms.

    Off-diagonal terms are mirrored when ``symmetric`` or ``antisymmetric``.
    Works on arrays and on jets.
    """
    is_jet = isinstance(x, jets.Jet)
    groups = {}
    for it in terms:
        groups.setdefault(it.idx, []).append(it.term)
    shape = (n,) * rank
    slots = {}
    for idx, ts in groups.items():
        v = eval_terms(ts, x)
        slots[idx] = slots[idx] + v if idx in slots else v
        if rank == 2 and idx[0] != idx[1] and (symmetric or antisymmetric):
            mirror = (idx[1], idx[0])
            mv = v if symmetric else -v
            slots[mirror] = slots[mirror] + mv if mirror in slots else mv
    zero = eval_terms((), x)
    flat = [slots.get(idx, zero) for idx in np.ndindex(*shape)]
    if is_jet:
        return jets.stack(flat, -1).reshape(x.shape[:-1] + shape)
    return np.stack(flat, -1).reshape(np.asarray(x).shape[:-1] + shape)


@dataclass(frozen=True)
class ScalarCoefficient:
    """Plain list of terms, used for pullback fields and profiles."""

    terms: tuple = field(default_factory=tuple)

    def __call__(self, x):
        return eval_terms(self.terms, x)
