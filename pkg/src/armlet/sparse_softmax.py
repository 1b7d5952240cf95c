"""Softmax and alpha-entmax maps onto the probability simplex, with backward.

``entmax`` solves argmax_p  p.z + H_alpha(p)  over the simplex, where H_alpha is
the Tsallis alpha-entropy. alpha=1 is softmax, alpha=2 is sparsemax (solved
exactly by sorting), and every other alpha > 1 is solved by bisection on the
threshold tau in  sum_j max((alpha-1) z_j - tau, 0) ** (1/(alpha-1)) = 1.

The row kernels come from the compiled ``_entmax_ext`` module when it was
built, and from ``_entmax_py`` otherwise. Set ``ARMLET_BACKEND=python`` to
force the fallback, or call :func:`set_backend` at runtime.
"""

from __future__ import annotations

import os
from types import ModuleType

import numpy as np

from . import _entmax_py
from .errors import ShapeError

try:
    from . import _entmax_ext
except ImportError:  # extension not built
    _entmax_ext = None

BISECT_MAX_ITER = 64
BISECT_TOL = 1e-12

_BACKENDS: dict[str, ModuleType | None] = {"compiled": _entmax_ext, "python": _entmax_py}
_kernels: ModuleType = _entmax_py
BACKEND = "python"


def available_backends() -> list[str]:
    return [name for name, mod in _BACKENDS.items() if mod is not None]


def set_backend(name: str) -> None:
    global _kernels, BACKEND
    mod = _BACKENDS.get(name)
    if mod is None:
        raise ValueError(f"backend {name!r} is not available; have {available_backends()}")
    _kernels = mod
    BACKEND = name


def get_backend() -> str:
    return BACKEND


_requested = os.environ.get("ARMLET_BACKEND", "").strip().lower()
if _requested in ("python", "py", "pure"):
    set_backend("python")
elif _entmax_ext is not None:
    set_backend("compiled")


def _as_rows(z) -> tuple[np.ndarray, tuple[int, ...]]:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim == 0 or z.shape[-1] == 0:
        raise ValueError("entmax needs a non-empty last axis")
    return np.ascontiguousarray(z.reshape(-1, z.shape[-1])), z.shape


def softmax(z) -> np.ndarray:
    """Dense softmax over the last axis, stabilised by subtracting the row max."""
    rows, shape = _as_rows(z)
    e = np.exp(rows - rows.max(axis=1, keepdims=True))
    return (e / e.sum(axis=1, keepdims=True)).reshape(shape)


def sparsemax(z) -> np.ndarray:
    """Euclidean projection onto the simplex (entmax with alpha=2), by sorting."""
    rows, shape = _as_rows(z)
    return _kernels.sparsemax_rows(rows).reshape(shape)


def entmax_bisect(z, alpha: float, max_iter: int = BISECT_MAX_ITER, tol: float = BISECT_TOL) -> np.ndarray:
    if alpha <= 1.0:
        raise ValueError(f"bisection needs alpha > 1, got {alpha}")
    rows, shape = _as_rows(z)
    return _kernels.entmax_bisect_rows(rows, float(alpha), int(max_iter), float(tol)).reshape(shape)


def entmax(z, alpha: float) -> np.ndarray:
    """alpha-entmax over the last axis of ``z``.

    Raises ``ValueError`` for alpha < 1 and ``NumericError`` if the bisection
    fails to bracket a unit-mass solution.
    """
    alpha = float(alpha)
    if alpha < 1.0:
        raise ValueError(f"alpha must be >= 1, got {alpha}")
    if alpha == 1.0:
        return softmax(z)
    if alpha == 2.0:
        return sparsemax(z)
    return entmax_bisect(z, alpha)


def entmax_jvp(p, alpha: float, dout) -> np.ndarray:
    """Backward pass of :func:`entmax`: returns J^T dout for output ``p``.

    With s_i = p_i^(2-alpha) on the support and 0 elsewhere, the Jacobian is
    diag(s) - s s^T / sum(s). It is symmetric, so J^T dout = J dout.
    """
    p = np.asarray(p, dtype=np.float64)
    dout = np.asarray(dout, dtype=np.float64)
    if p.shape != dout.shape:
        raise ShapeError(f"entmax_jvp shape mismatch: {p.shape} vs {dout.shape}")
    rows, shape = _as_rows(p)
    drows = np.ascontiguousarray(dout.reshape(rows.shape))
    return _kernels.entmax_jvp_rows(rows, float(alpha), drows).reshape(shape)


def support(p) -> np.ndarray:
    return np.asarray(p) > 0
