# Compiled row kernels for entmax; mirrors armlet._entmax_py exactly.
import numpy as np
cimport numpy as cnp
from libc.math cimport pow, fabs, isfinite
from libc.stdlib cimport malloc, free, qsort

from .errors import NumericError

cnp.import_array()


cdef int _cmp_desc(const void* a, const void* b) noexcept nogil:
    cdef double x = (<double*>a)[0]
    cdef double y = (<double*>b)[0]
    if x < y:
        return 1
    if x > y:
        return -1
    return 0


def sparsemax_rows(z):
    cdef double[:, ::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef Py_ssize_t n = zv.shape[0], d = zv.shape[1]
    out = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef double* u = <double*>malloc(max(d, 1) * sizeof(double))
    cdef Py_ssize_t r, j, rho
    cdef double zmax, cs, tau, csrho, v
    try:
        with nogil:
            for r in range(n):
                zmax = zv[r, 0]
                for j in range(1, d):
                    if zv[r, j] > zmax:
                        zmax = zv[r, j]
                for j in range(d):
                    u[j] = zv[r, j] - zmax
                qsort(u, d, sizeof(double), _cmp_desc)
                cs = -1.0
                rho = 0
                csrho = 0.0
                for j in range(d):
                    cs = cs + u[j]
                    if u[j] - cs / (j + 1) > 0:
                        rho = j + 1
                        csrho = cs
                tau = csrho / rho
                for j in range(d):
                    v = zv[r, j] - zmax - tau
                    ov[r, j] = v if v > 0 else 0.0
    finally:
        free(u)
    return out


def entmax_bisect_rows(z, double alpha, int max_iter=64, double tol=1e-12):
    cdef double[:, ::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef Py_ssize_t n = zv.shape[0], d = zv.shape[1]
    out = np.zeros((n, d), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef double* x = <double*>malloc(max(d, 1) * sizeof(double))
    cdef double am1 = alpha - 1.0
    cdef double inv = 1.0 / am1
    cdef Py_ssize_t r, j
    cdef int it
    cdef double zmax, lo, hi, tau, f, mass, v, pw, slope, step
    cdef bint failed = False
    cdef bint square = inv == 2.0
    try:
        with nogil:
            for r in range(n):
                zmax = zv[r, 0]
                for j in range(1, d):
                    if zv[r, j] > zmax:
                        zmax = zv[r, j]
                for j in range(d):
                    x[j] = am1 * (zv[r, j] - zmax)
                lo = -1.0
                hi = 0.0
                tau = -0.5
                mass = 0.0
                for it in range(max_iter):
                    mass = 0.0
                    slope = 0.0
                    for j in range(d):
                        v = x[j] - tau
                        if v > 0:
                            if square:
                                pw = v * v
                            else:
                                pw = pow(v, inv)
                            slope = slope + pw / v
                        else:
                            pw = 0.0
                        ov[r, j] = pw
                        mass = mass + pw
                    f = mass - 1.0
                    if f >= 0:
                        lo = tau
                    else:
                        hi = tau
                    if fabs(f) < tol:
                        break
                    # Newton step when it stays inside the bracket, else bisect
                    step = tau + f / (inv * slope) if slope > 0 else lo
                    if lo < step < hi:
                        tau = step
                    else:
                        tau = 0.5 * (lo + hi)
                if not isfinite(mass) or fabs(mass - 1.0) > 1e-6:
                    failed = True
                    break
                for j in range(d):
                    ov[r, j] = ov[r, j] / mass
    finally:
        free(x)
    if failed:
        raise NumericError("entmax bisection did not converge")
    return out


def entmax_jvp_rows(p, double alpha, dout):
    cdef double[:, ::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef double[:, ::1] dv = np.ascontiguousarray(dout, dtype=np.float64)
    cdef Py_ssize_t n = pv.shape[0], d = pv.shape[1]
    out = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] ov = out
    cdef Py_ssize_t r, j
    cdef double s, ssum, gsum, q
    cdef int mode = 1 if alpha == 1.0 else (2 if alpha == 2.0 else 0)
    with nogil:
        for r in range(n):
            ssum = 0.0
            gsum = 0.0
            for j in range(d):
                if pv[r, j] > 0:
                    if mode == 1:
                        s = pv[r, j]
                    elif mode == 2:
                        s = 1.0
                    else:
                        s = pow(pv[r, j], 2.0 - alpha)
                else:
                    s = 0.0
                ssum = ssum + s
                gsum = gsum + s * dv[r, j]
            q = gsum / ssum
            for j in range(d):
                if pv[r, j] > 0:
                    if mode == 1:
                        s = pv[r, j]
                    elif mode == 2:
                        s = 1.0
                    else:
                        s = pow(pv[r, j], 2.0 - alpha)
                    ov[r, j] = s * dv[r, j] - q * s
                else:
                    ov[r, j] = 0.0
    return out
