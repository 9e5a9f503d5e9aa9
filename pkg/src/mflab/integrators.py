"""Adaptive Dormand-Prince 5(4) with an optional projection after each step."""
import numpy as np

from .errors import StepFailure

_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_ERR = _B - _B4


def dopri5(f, t0, z0, t_end, tol=1e-10, t_eval=None, project=None, h0=None, max_steps=2_000_000,
           error_slice=None):
    """Integrate ``z' = f(t, z)`` from ``t0`` to ``t_end``.

    Returns ``(ts, zs, stats)``.  With ``t_eval`` the output is sampled exactly
    at those (increasing) times by shortening steps; otherwise every accepted
    step is returned.  ``project(z)`` is applied after each accepted step.
    ``error_slice`` restricts step-size control to part of the state.
    """
    z = np.array(z0, dtype=float)
    t = float(t0)
    direction = 1.0 if t_end >= t0 else -1.0
    targets = None if t_eval is None else list(np.asarray(t_eval, dtype=float))
    ts, zs = [], []
    if targets is None or (targets and abs(targets[0] - t) == 0.0):
        ts.append(t)
        zs.append(z.copy())
        if targets:
            targets.pop(0)
    sl = slice(None) if error_slice is None else error_slice
    k1 = f(t, z)
    if h0 is None:
        scale = tol + tol * np.abs(z[sl])
        d0 = np.sqrt(np.mean((z[sl] / scale) ** 2))
        d1 = np.sqrt(np.mean((k1[sl] / scale) ** 2))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, abs(t_end - t0)) if t_end != t0 else h0
    h = abs(h0)
    steps = rejected = 0
    while direction * (t_end - t) > 1e-14 * max(1.0, abs(t_end)):
        stop = t_end
        if targets:
            stop = targets[0]
        hh = min(h, abs(stop - t))
        hit = hh == abs(stop - t)
        hs = direction * hh
        ks = [k1]
        for i in range(1, 7):
            zi = z + hs * sum(a * k for a, k in zip(_A[i], ks))
            ks.append(f(t + _C[i] * hs, zi))
        znew = z + hs * sum(b * k for b, k in zip(_B, ks) if b)
        err = hs * sum(e * k for e, k in zip(_ERR, ks) if e)
        scale = tol + tol * np.maximum(np.abs(z[sl]), np.abs(znew[sl]))
        en = np.sqrt(np.mean((err[sl] / scale) ** 2))
        if not np.isfinite(en):
            en = 1e10
        if en <= 1.0:
            t = stop if hit else t + hs
            z = znew
            if project is not None:
                z = project(z)
                k1 = f(t, z)
            else:
                k1 = ks[6]
            steps += 1
            if targets is None:
                ts.append(t)
                zs.append(z.copy())
            elif hit and targets:
                ts.append(t)
                zs.append(z.copy())
                targets.pop(0)
            fac = 5.0 if en == 0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
            if hit and hh < h:
                # a step shortened to land on an output time says little about h
                h = max(hh * fac, h * min(1.0, fac))
            else:
                h = hh * fac
        else:
            rejected += 1
            h = hh * max(0.2, 0.9 * en ** -0.2)
        if h < 1e-14 * max(1.0, abs(t)):
            raise StepFailure(f"step size collapsed at t={t:.6g}")
        if steps + rejected > max_steps:
            raise StepFailure("maximum number of steps exceeded")
    if targets:
        # remaining targets coincide with t_end
        for _ in targets:
            ts.append(t)
            zs.append(z.copy())
    return np.array(ts), np.array(zs), {"steps": steps, "rejected": rejected, "tol": tol}
