"""Truncated multivariate Taylor arithmetic.

A :class:`Jet` stores the normalized Taylor coefficients ``d^a f / a!`` of a
(tensor-valued) function at a batch of points, truncated at total degree
``k``.  The coefficient axis comes first, so ``c[0]`` is the value and
``c[1 + v]`` the first partial along variable ``v``.  Monomials are graded by
degree, which makes truncation to a lower order a slice of the leading axis.

Products go through a small numba kernel driven by a precomputed table of
monomial pairs sorted by output index.  Derivatives lower the order by one.
"""
from functools import lru_cache
from itertools import combinations_with_replacement
from math import comb, factorial

import numba
import numpy as np


@numba.njit(cache=True)
def _mul_kernel(a, b, io, ia, ib, npairs, m):
    nb = a.shape[1]
    out = np.zeros((m, nb))
    for p in range(npairs):
        o = io[p]
        x = ia[p]
        y = ib[p]
        for n in range(nb):
            out[o, n] += a[x, n] * b[y, n]
    return out


class JetSpace:
    """Index tables for jets in ``nvars`` variables up to total degree ``order``."""

    def __init__(self, nvars, order):
        self.nvars = nvars
        self.order = order
        monos = []
        sizes = []
        for k in range(order + 1):
            for combo in combinations_with_replacement(range(nvars), k):
                alpha = [0] * nvars
                for v in combo:
                    alpha[v] += 1
                monos.append(tuple(alpha))
            sizes.append(len(monos))
        self.monomials = monos
        self.sizes = sizes
        index = {a: i for i, a in enumerate(monos)}
        self.index = index

        io, ia, ib = [], [], []
        for i, a in enumerate(monos):
            for j, b in enumerate(monos):
                s = tuple(p + q for p, q in zip(a, b))
                if sum(s) <= order:
                    io.append(index[s])
                    ia.append(i)
                    ib.append(j)
        io = np.array(io, dtype=np.int64)
        perm = np.argsort(io, kind="stable")
        self.io = io[perm]
        self.ia = np.array(ia, dtype=np.int64)[perm]
        self.ib = np.array(ib, dtype=np.int64)[perm]
        # pairs contributing to degree <= k form a prefix of the sorted table
        self.npairs = [int(np.searchsorted(self.io, sizes[k])) for k in range(order + 1)]

        self.dsrc = []
        self.dfac = []
        for v in range(nvars):
            src = np.zeros(sizes[order - 1] if order > 0 else 0, dtype=np.int64)
            fac = np.zeros_like(src, dtype=float)
            for i in range(len(src)):
                a = list(monos[i])
                a[v] += 1
                src[i] = index[tuple(a)]
                fac[i] = a[v]
            self.dsrc.append(src)
            self.dfac.append(fac)

    def size(self, k):
        return self.sizes[k]


@lru_cache(maxsize=None)
def jet_space(nvars, order):
    return JetSpace(nvars, order)


class Jet:
    """Batched truncated Taylor expansion; ``c`` has shape ``(M_k, *shape)``."""

    __slots__ = ("c", "k", "space")
    __array_ufunc__ = None

    def __init__(self, c, k, space):
        self.c = c
        self.k = k
        self.space = space

    # construction ---------------------------------------------------------
    @classmethod
    def variable(cls, space, values, v):
        values = np.asarray(values, dtype=float)
        c = np.zeros((space.sizes[space.order],) + values.shape)
        c[0] = values
        if space.order > 0:
            c[1 + v] = 1.0
        return cls(c, space.order, space)

    @classmethod
    def constant(cls, space, values, k=None):
        k = space.order if k is None else k
        values = np.asarray(values, dtype=float)
        c = np.zeros((space.sizes[k],) + values.shape)
        c[0] = values
        return cls(c, k, space)

    # basic access ---------------------------------------------------------
    @property
    def shape(self):
        return self.c.shape[1:]

    @property
    def ndim(self):
        return self.c.ndim - 1

    @property
    def value(self):
        return self.c[0]

    def __len__(self):
        return self.c.shape[1]

    def __repr__(self):
        return f"Jet(order={self.k}, shape={self.shape})"

    def trunc(self, k):
        if k >= self.k:
            return self
        return Jet(self.c[: self.space.sizes[k]], k, self.space)

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.c[(slice(None),) + idx], self.k, self.space)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return Jet(self.c.reshape((self.c.shape[0],) + tuple(shape)), self.k, self.space)

    def swapaxes(self, a, b):
        a = a + 1 if a >= 0 else a
        b = b + 1 if b >= 0 else b
        return Jet(np.swapaxes(self.c, a, b), self.k, self.space)

    def moveaxis(self, a, b):
        a = a + 1 if a >= 0 else a
        b = b + 1 if b >= 0 else b
        return Jet(np.moveaxis(self.c, a, b), self.k, self.space)

    @property
    def T(self):
        # swap the last two axes
        return self.swapaxes(-1, -2)

    def sum(self, axis):
        axis = axis + 1 if axis >= 0 else axis
        return Jet(self.c.sum(axis=axis), self.k, self.space)

    def expand(self, axis):
        axis = axis + 1 if axis >= 0 else axis
        return Jet(np.expand_dims(self.c, axis), self.k, self.space)

    # arithmetic -----------------------------------------------------------
    def __neg__(self):
        return Jet(-self.c, self.k, self.space)

    def __add__(self, other):
        if isinstance(other, Jet):
            k = min(self.k, other.k)
            m = self.space.sizes[k]
            return Jet(self.c[:m] + other.c[:m], k, self.space)
        other = np.asarray(other, dtype=float)
        shape = np.broadcast_shapes(self.shape, other.shape)
        c = np.broadcast_to(self.c, self.c.shape[:1] + shape).copy()
        c[0] += other
        return Jet(c, self.k, self.space)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            return _mul(self, other)
        other = np.asarray(other, dtype=float)
        return Jet(self.c * other, self.k, self.space)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) and p >= 0:
            return ipow(self, int(p))
        return power(self, p)

    def reciprocal(self):
        return power(self, -1.0)

    # differentiation ------------------------------------------------------
    def d(self, v):
        """Partial derivative along variable ``v`` (order drops by one)."""
        if self.k == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        sp = self.space
        m = sp.sizes[self.k - 1]
        src = sp.dsrc[v][:m]
        fac = sp.dfac[v][:m].reshape((m,) + (1,) * self.ndim)
        return Jet(self.c[src] * fac, self.k - 1, sp)

    def grad(self, variables):
        """Stack of partials along ``variables`` as a new trailing axis."""
        parts = [self.d(v).c for v in variables]
        return Jet(np.stack(parts, axis=-1), self.k - 1, self.space)


def _mul(a, b):
    k = min(a.k, b.k)
    sp = a.space
    m = sp.sizes[k]
    shape = np.broadcast_shapes(a.shape, b.shape)
    A = np.ascontiguousarray(np.broadcast_to(a.c[:m], (m,) + shape)).reshape(m, -1)
    B = np.ascontiguousarray(np.broadcast_to(b.c[:m], (m,) + shape)).reshape(m, -1)
    out = _mul_kernel(A, B, sp.io, sp.ia, sp.ib, sp.npairs[k], m)
    return Jet(out.reshape((m,) + shape), k, sp)


def ipow(a, p):
    if p == 0:
        return Jet.constant(a.space, np.ones(a.shape), a.k)
    out = a
    for _ in range(p - 1):
        out = out * a
    return out


def compose(a, coeffs):
    """Evaluate ``sum_m coeffs[m] * (a - a0)^m`` with coefficient arrays per point."""
    k = a.k
    delta = Jet(a.c.copy(), k, a.space)
    delta.c[0] = 0.0
    r = Jet.constant(a.space, coeffs[k], k)
    for m in range(k - 1, -1, -1):
        r = r * delta
        r.c[0] += coeffs[m]
    return r


def power(a, p):
    a0 = a.value
    if np.any(a0 <= 0.0) and not float(p).is_integer():
        raise ValueError("non-integer power of a non-positive jet")
    coeffs = [_binom(p, m) * a0 ** (p - m) for m in range(a.k + 1)]
    return compose(a, coeffs)


def _binom(p, m):
    out = 1.0
    for i in range(m):
        out *= (p - i) / (i + 1)
    return out


def sqrt(a):
    return power(a, 0.5)


def exp(a):
    e = np.exp(a.value)
    return compose(a, [e / factorial(m) for m in range(a.k + 1)])


def log(a):
    a0 = a.value
    coeffs = [np.log(a0)] + [(-1.0) ** (m + 1) / (m * a0**m) for m in range(1, a.k + 1)]
    return compose(a, coeffs)


def _trig_coeffs(s, c, k, shift):
    cyc = [s, c, -s, -c]
    return [cyc[(m + shift) % 4] / factorial(m) for m in range(k + 1)]


def sin(a):
    s, c = np.sin(a.value), np.cos(a.value)
    return compose(a, _trig_coeffs(s, c, a.k, 0))


def cos(a):
    s, c = np.sin(a.value), np.cos(a.value)
    return compose(a, _trig_coeffs(s, c, a.k, 1))


def stack(jets, axis=-1):
    k = min(j.k for j in jets)
    m = jets[0].space.sizes[k]
    axis = axis + 1 if axis >= 0 else axis
    return Jet(np.stack([j.c[:m] for j in jets], axis=axis), k, jets[0].space)


def seed(values, order):
    """Jets for each column of ``values`` (shape ``(N, d)``) as independent variables."""
    values = np.asarray(values, dtype=float)
    d = values.shape[-1]
    sp = jet_space(d, order)
    c = np.zeros((sp.sizes[order],) + values.shape)
    c[0] = values
    if order > 0:
        for v in range(d):
            c[1 + v, ..., v] = 1.0
    return Jet(c, order, sp)


# einsum ---------------------------------------------------------------------

def einsum(subscripts, *ops):
    """``np.einsum`` over jets and arrays; evaluated pairwise left to right."""
    lhs, out = subscripts.replace(" ", "").split("->")
    terms = lhs.split(",")
    if len(terms) != len(ops):
        raise ValueError("operand count mismatch")
    cur_t, cur = terms[0], ops[0]
    for i in range(1, len(ops)):
        rest = "".join(terms[i + 1:]) + out
        keep = "".join(dict.fromkeys(l for l in cur_t + terms[i] if l in rest))
        cur = _einsum2(cur_t, terms[i], keep, cur, ops[i])
        cur_t = keep
    if cur_t != out:
        cur = _einsum1(cur_t, out, cur)
    return cur


def _einsum1(sub, out, a):
    if isinstance(a, Jet):
        return Jet(np.einsum("Q" + sub + "->Q" + out, a.c), a.k, a.space)
    return np.einsum(sub + "->" + out, a)


def _einsum2(sa, sb, so, a, b):
    ja, jb = isinstance(a, Jet), isinstance(b, Jet)
    if not ja and not jb:
        return np.einsum(f"{sa},{sb}->{so}", a, b)
    if ja and not jb:
        return Jet(np.einsum(f"Q{sa},{sb}->Q{so}", a.c, b), a.k, a.space)
    if jb and not ja:
        return Jet(np.einsum(f"{sa},Q{sb}->Q{so}", a, b.c), b.k, b.space)
    union = list(dict.fromkeys(sa + sb))
    sizes = {}
    for s, x in ((sa, a), (sb, b)):
        for l, n in zip(s, x.shape):
            if sizes.get(l, 1) == 1:
                sizes[l] = n
    k = min(a.k, b.k)
    m = a.space.sizes[k]
    full = (m,) + tuple(sizes[l] for l in union)

    def align(s, x):
        order = [s.index(l) for l in union if l in s]
        c = np.transpose(x.c[:m], [0] + [i + 1 for i in order])
        shp = (m,) + tuple(x.shape[s.index(l)] if l in s else 1 for l in union)
        c = c.reshape(shp)
        return np.ascontiguousarray(np.broadcast_to(c, full)).reshape(m, -1)

    A = align(sa, a)
    B = align(sb, b)
    sp = a.space
    prod = _mul_kernel(A, B, sp.io, sp.ia, sp.ib, sp.npairs[k], m).reshape(full)
    contracted = tuple(i + 1 for i, l in enumerate(union) if l not in so)
    if contracted:
        prod = prod.sum(axis=contracted)
    remaining = [l for l in union if l in so]
    perm = [0] + [remaining.index(l) + 1 for l in so]
    return Jet(np.transpose(prod, perm), k, sp)


def taylor_coefficient_count(nvars, order):
    return comb(nvars + order, order)
