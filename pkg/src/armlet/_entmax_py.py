"""Pure numpy row kernels for entmax; reference fallback for ``_entmax_ext``.

Every function takes a C-contiguous float64 matrix whose rows are
independent inputs and returns a new matrix of the same shape.
"""

import numpy as np

from .errors import NumericError


def sparsemax_rows(z):
    z = np.asarray(z, dtype=np.float64)
    z = z - z.max(axis=1, keepdims=True)
    u = -np.sort(-z, axis=1)
    cssv = np.cumsum(u, axis=1) - 1.0
    k = np.arange(1, z.shape[1] + 1, dtype=np.float64)
    support = u - cssv / k > 0
    rho = support.sum(axis=1)
    tau = cssv[np.arange(z.shape[0]), rho - 1] / rho
    return np.maximum(z - tau[:, None], 0.0)


def entmax_bisect_rows(z, alpha, max_iter=64, tol=1e-12):
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    if n == 0:
        return np.zeros_like(z)
    am1 = alpha - 1.0
    inv = 1.0 / am1
    x = am1 * (z - z.max(axis=1, keepdims=True))
    lo = np.full(n, -1.0)
    hi = np.zeros(n)
    tau = np.full(n, -0.5)
    active = np.ones(n, dtype=bool)
    p = np.zeros_like(x)
    mass = np.zeros(n)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        t = tau[idx]
        v = np.maximum(x[idx] - t[:, None], 0.0)
        pa = v * v if inv == 2.0 else v ** inv
        on = v > 0
        slope = np.zeros_like(pa)
        slope[on] = pa[on] / v[on]
        slope = slope.sum(axis=1)
        f = pa.sum(axis=1) - 1.0
        p[idx] = pa
        mass[idx] = f + 1.0
        above = f >= 0
        lo[idx[above]] = t[above]
        hi[idx[~above]] = t[~above]
        active[idx[np.abs(f) < tol]] = False
        # Newton step when it stays inside the bracket, else bisect
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(slope > 0, t + f / (inv * slope), lo[idx])
        inside = (lo[idx] < step) & (step < hi[idx])
        tau[idx] = np.where(inside, step, 0.5 * (lo[idx] + hi[idx]))
    if not np.all(np.isfinite(mass)) or np.any(np.abs(mass - 1.0) > 1e-6):
        raise NumericError("entmax bisection did not converge")
    return p / mass[:, None]


def entmax_jvp_rows(p, alpha, dout):
    p = np.asarray(p, dtype=np.float64)
    dout = np.asarray(dout, dtype=np.float64)
    if alpha == 1.0:
        s = p
    elif alpha == 2.0:
        s = (p > 0).astype(np.float64)
    else:
        s = np.zeros_like(p)
        on = p > 0
        s[on] = p[on] ** (2.0 - alpha)
    g = s * dout
    q = g.sum(axis=1, keepdims=True) / s.sum(axis=1, keepdims=True)
    return g - q * s
