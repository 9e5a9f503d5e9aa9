"""Identity reports shared by the verification modules."""
from dataclasses import dataclass, field

import numpy as np


@dataclass
class IdentityReport:
    name: str
    lhs: object
    rhs: object
    residual: float
    rel_residual: float
    terms: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @classmethod
    def build(cls, name, lhs, rhs, terms=None, meta=None):
        lhs_a = np.asarray(lhs, dtype=float)
        rhs_a = np.asarray(rhs, dtype=float)
        res = float(np.max(np.abs(lhs_a - rhs_a))) if lhs_a.size else 0.0
        terms = dict(terms or {})
        mags = [lhs_a, rhs_a] + [np.asarray(t, dtype=float) for t in terms.values()]
        scale = max(float(np.max(np.abs(m), initial=0.0)) for m in mags)
        rel = res / scale if scale > 0 else res
        return cls(name, lhs, rhs, res, rel, terms, dict(meta or {}))

    def passed(self, tol):
        return self.residual <= tol

    def to_json(self):
        def conv(v):
            v = np.asarray(v, dtype=float)
            return float(v) if v.ndim == 0 else float(np.max(np.abs(v)))

        return {
            "name": self.name,
            "lhs": conv(self.lhs),
            "rhs": conv(self.rhs),
            "residual": self.residual,
            "rel_residual": self.rel_residual,
            "terms": {k: conv(v) for k, v in self.terms.items()},
            "meta": self.meta,
        }
