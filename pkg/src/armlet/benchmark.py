"""Timing helpers: inference throughput against the number of fields, and
compiled against pure-Python entmax kernels."""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from . import sparse_softmax
from .data import SyntheticSpec, generate_synthetic
from .errors import ContractError
from .model import ArmConfig, Model


@dataclass
class ThroughputRow:
    m: int
    median_seconds: float
    tuples_per_second: float
    seconds_per_tuple: float

    def to_json(self) -> dict:
        return {"m": self.m, "median_seconds": self.median_seconds,
                "tuples_per_second": self.tuples_per_second,
                "seconds_per_tuple": self.seconds_per_tuple}


@dataclass
class ThroughputReport:
    rows: list[ThroughputRow]
    slope: float
    intercept: float
    r2: float
    config: dict

    def to_json(self) -> dict:
        return {"rows": [r.to_json() for r in self.rows], "fit": {
            "slope": self.slope, "intercept": self.intercept, "r2": self.r2}, "config": self.config}

    def table(self) -> str:
        lines = [f"{'m':>4} {'tuples/s':>12} {'us/tuple':>10}"]
        lines += [f"{r.m:>4} {r.tuples_per_second:>12.1f} {1e6 * r.seconds_per_tuple:>10.3f}"
                  for r in self.rows]
        lines.append(f"per-tuple time ~ {1e6 * self.intercept:.3f} + {1e6 * self.slope:.4f} m us, "
                     f"R^2 = {self.r2:.4f}")
        return "\n".join(lines)


def linear_fit(x, y) -> tuple[float, float, float]:
    """Least-squares line y ~ a + b x; returns (b, a, R^2)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    b, a = np.polyfit(x, y, 1)
    resid = y - (a + b * x)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return float(b), float(a), r2


def _timed(fn, reps: int) -> float:
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    # the first repetition is warm-up
    return float(np.median(times[1:]))


def throughput(cfg: ArmConfig, m_list, batch: int = 2048, reps: int = 5,
               seed: int = 0, cardinality: int = 10, kind: str = "arm") -> ThroughputReport:
    """Eval-mode inference throughput of a fresh ``kind`` model for each field count m.

    Inputs are seeded synthetic instances, so reruns see identical data.
    """
    if reps < 3:
        raise ContractError("bench needs reps >= 3 (the first one is dropped)")
    if batch < 1 or not m_list:
        raise ContractError("bench needs batch >= 1 and a nonempty m list")
    rows = []
    for m in m_list:
        ds = generate_synthetic(SyntheticSpec((cardinality,) * m, n=batch), seed).dataset
        model = Model.create(kind, replace(cfg, m=m), ds.schema, seed).freeze()
        r, v = ds.rows, ds.value
        sec = _timed(lambda: model.forward(r, v), reps)
        rows.append(ThroughputRow(m, sec, batch / sec, sec / batch))
    slope, intercept, r2 = linear_fit([r.m for r in rows], [r.seconds_per_tuple for r in rows])
    config = {"K": cfg.K, "o": cfg.o, "n_e": cfg.n_e, "alpha": cfg.alpha, "batch": batch,
              "reps": reps, "seed": seed, "kind": kind}
    return ThroughputReport(rows, slope, intercept, r2, config)


def compare_backends(rows: int = 16384, width: int = 16, alphas=(1.0, 1.5, 1.7, 2.0),
                     reps: int = 5, seed: int = 0) -> list[dict]:
    """Median seconds of the entmax forward and backward kernels per backend."""
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(rows, width))
    d = rng.normal(size=(rows, width))
    prev = sparse_softmax.get_backend()
    out = []
    try:
        for alpha in alphas:
            rec = {"alpha": alpha, "rows": rows, "width": width}
            for name in sparse_softmax.available_backends():
                sparse_softmax.set_backend(name)
                p = sparse_softmax.entmax(z, alpha)
                rec[f"{name}_forward"] = _timed(lambda: sparse_softmax.entmax(z, alpha), reps)
                rec[f"{name}_backward"] = _timed(lambda: sparse_softmax.entmax_jvp(p, alpha, d), reps)
            out.append(rec)
    finally:
        sparse_softmax.set_backend(prev)
    return out
