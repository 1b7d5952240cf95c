"""Dense arithmetic helpers, seeded random streams, parameter storage and Adam.

All math runs in float64. Random streams come from numpy's PCG64 bit
generator (``numpy.random.default_rng``), whose update rule is the published
PCG-XSL-RR 128/64 permuted congruential generator; a fixed integer seed
therefore fixes every draw on every platform numpy supports.
"""

from __future__ import annotations

from typing import Callable, Iterator

import numpy as np

from .errors import NumericError, OptimizerError, OracleError, ShapeError

DTYPE = np.float64


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of two 2-D float arrays with shape and finiteness checks."""
    a = np.asarray(a, dtype=DTYPE)
    b = np.asarray(b, dtype=DTYPE)
    if a.ndim != 2 or b.ndim != 2:
        raise ShapeError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    out = a @ b
    if not np.all(np.isfinite(out)):
        raise NumericError("matmul produced non-finite entries")
    return out


# -- random streams ----------------------------------------------------------

def rng_new(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def rng_normal(rng: np.random.Generator, mu: float = 0.0, sigma: float = 1.0, size=None):
    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    return rng.normal(mu, sigma, size=size)


def rng_uniform(rng: np.random.Generator, lo: float = 0.0, hi: float = 1.0, size=None):
    return rng.uniform(lo, hi, size=size)


# -- parameters ----------------------------------------------------------------

class ParamStore:
    """Named float64 tensors with gradient and Adam moment buffers.

    ``params``, ``grads``, ``m`` and ``v`` are parallel dicts; ``t`` counts
    completed optimizer steps.
    """

    def __init__(self, params: dict[str, np.ndarray] | None = None):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0
        for name, value in (params or {}).items():
            self.add(name, value)

    def add(self, name: str, value) -> np.ndarray:
        arr = np.array(value, dtype=DTYPE)
        self.params[name] = arr
        self.grads[name] = np.zeros_like(arr)
        self.m[name] = np.zeros_like(arr)
        self.v[name] = np.zeros_like(arr)
        return arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def __iter__(self) -> Iterator[str]:
        return iter(self.params)

    def __len__(self) -> int:
        return len(self.params)

    def names(self) -> list[str]:
        return list(self.params)

    def size(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.params.items()}

    def load(self, values: dict[str, np.ndarray]) -> None:
        for name, value in values.items():
            if name not in self.params:
                raise KeyError(f"unknown parameter {name!r}")
            value = np.asarray(value, dtype=DTYPE)
            if value.shape != self.params[name].shape:
                raise ShapeError(
                    f"{name}: expected shape {self.params[name].shape}, got {value.shape}"
                )
            self.params[name][...] = value

    def copy(self) -> "ParamStore":
        other = ParamStore()
        for name in self.params:
            other.params[name] = self.params[name].copy()
            other.grads[name] = self.grads[name].copy()
            other.m[name] = self.m[name].copy()
            other.v[name] = self.v[name].copy()
        other.t = self.t
        return other

    def grad_norms(self) -> dict[str, float]:
        return {k: float(np.linalg.norm(g)) for k, g in self.grads.items()}

    def param_norms(self) -> dict[str, float]:
        return {k: float(np.linalg.norm(p)) for k, p in self.params.items()}


def adam_step(
    store: ParamStore,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> ParamStore:
    """Bias-corrected Adam update of every tensor in ``store``, in place.

    Gradients are checked for finiteness before anything is modified, the
    step counter is incremented and gradients are zeroed afterwards.
    """
    for name, g in store.grads.items():
        if not np.all(np.isfinite(g)):
            raise OptimizerError("non-finite gradient", name)

    store.t += 1
    bc1 = 1.0 - beta1 ** store.t
    bc2 = 1.0 - beta2 ** store.t
    for name, p in store.params.items():
        g = store.grads[name]
        m = store.m[name]
        v = store.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        if lr != 0.0:
            p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        g.fill(0.0)
    return store


# -- finite differences --------------------------------------------------------

def finite_diff_grad(
    f: Callable[[ParamStore], float],
    store: ParamStore,
    h: float = 1e-5,
    names: list[str] | None = None,
) -> dict[str, np.ndarray]:
    """Central-difference gradient of a scalar function of ``store``.

    Each coordinate is perturbed in place by +h and -h and restored exactly
    afterwards. Only tensors listed in ``names`` are visited when given.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    out: dict[str, np.ndarray] = {}
    for name in names if names is not None else store.names():
        p = store.params[name]
        flat = p.reshape(-1)
        grad = np.zeros(p.size, dtype=DTYPE)
        for i in range(p.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f(store)
            flat[i] = orig - h
            fm = f(store)
            flat[i] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise OracleError(f"{name}[{i}]: function returned a non-finite value")
            grad[i] = (fp - fm) / (2.0 * h)
        out[name] = grad.reshape(p.shape)
    return out


def relative_error(analytic, numeric) -> float:
    """|a - n| / max(1e-8, |a| + |n|), with norms taken over whole tensors."""
    a = np.asarray(analytic, dtype=DTYPE).ravel()
    n = np.asarray(numeric, dtype=DTYPE).ravel()
    return float(np.linalg.norm(a - n) / max(1e-8, np.linalg.norm(a) + np.linalg.norm(n)))
