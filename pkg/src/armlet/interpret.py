"""Feature attribution read directly off a trained ARM model.

Global importance aggregates the magnitudes of the value vectors; local
attribution aggregates the magnitudes of the gated interaction weights of one
instance; the interaction catalog counts which field sets the exponential
neurons actually combine across a dataset.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, Instance
from .model import Model


def _arm_params(model: Model):
    if not model.has_arm:
        raise ValueError(f"attribution needs an ARM model, got {model.kind!r}")
    return model.store


def _normalize(score: np.ndarray) -> tuple[np.ndarray, bool]:
    total = score.sum()
    if total > 0:
        return score / total, False
    return np.full(score.shape, 1.0 / score.size), True


@dataclass
class GlobalImportance:
    scores: np.ndarray
    names: list[str]
    degenerate: bool = False

    def ranking(self) -> list[int]:
        return [int(j) for j in np.argsort(-self.scores, kind="stable")]

    def to_json(self) -> dict:
        return {n: float(s) for n, s in zip(self.names, self.scores)}


def global_importance(model: Model) -> GlobalImportance:
    """score_j = sum over heads k and neurons i of |V[k][j, i]|, normalised to sum 1."""
    V = _arm_params(model)["arm.V"]
    scores, degenerate = _normalize(np.abs(V).sum(axis=(0, 2)))
    return GlobalImportance(scores, model.schema.names, degenerate)


@dataclass
class LocalAttribution:
    scores: np.ndarray
    neurons: np.ndarray
    names: list[str]
    degenerate: bool = False

    def to_json(self) -> dict:
        return {
            "scores": {n: float(s) for n, s in zip(self.names, self.scores)},
            "degenerate": self.degenerate,
        }


def local_attribution(instance: Instance | Dataset, model: Model, index: int = 0) -> LocalAttribution:
    """Per-field attribution of one instance from its gated interaction weights.

    ``neurons`` holds |w_i| for every neuron (K*o, m); field scores are their
    column sums, normalised. An all-zero weight matrix yields a uniform score
    with ``degenerate`` set.
    """
    _arm_params(model)
    if isinstance(instance, Dataset):
        rows, vals = instance.rows[index:index + 1], instance.value[index:index + 1]
    else:
        rows, vals = model.instance_batch(instance)
    trace = model.forward(rows, vals)
    arm = trace.arm if model.kind == "arm_plus" else trace
    neurons = np.abs(arm.attention.weights[0])
    scores, degenerate = _normalize(neurons.sum(axis=0))
    return LocalAttribution(scores, neurons, model.schema.names, degenerate)


@dataclass(frozen=True)
class InteractionTerm:
    fields: tuple[int, ...]
    frequency: float

    @property
    def order(self) -> int:
        return len(self.fields)

    def to_json(self, names: list[str] | None = None) -> dict:
        out = {"fields": list(self.fields), "frequency": self.frequency, "order": self.order}
        if names is not None:
            out["names"] = [names[j] for j in self.fields]
        return out


@dataclass
class TermCounts:
    counts: Counter
    n: int
    degenerate: int
    neurons: int
    extra: dict = field(default_factory=dict)

    @property
    def total_frequency(self) -> float:
        return sum(self.counts.values()) / self.n

    @property
    def degenerate_frequency(self) -> float:
        return self.degenerate / self.n

    def terms(self) -> list[InteractionTerm]:
        ordered = sorted(self.counts.items(), key=lambda kv: (-kv[1], len(kv[0]), kv[0]))
        return [InteractionTerm(k, c / self.n) for k, c in ordered]


def count_interaction_terms(data: Dataset, model: Model, batch_size: int = 2048) -> TermCounts:
    """Count captured field sets support(w_i) = {j : z_ij > 0 and v_ij != 0}.

    Every neuron contributes exactly one term per instance; neurons whose
    support is empty are tallied in ``degenerate`` instead.
    """
    store = _arm_params(model)
    if data.N == 0:
        raise ValueError("interaction catalog of an empty dataset")
    cfg = model.cfg
    counts: Counter = Counter()
    degenerate = 0
    active_v = (store["arm.V"] != 0).transpose(0, 2, 1).reshape(cfg.K * cfg.o, cfg.m)
    for start in range(0, data.N, batch_size):
        trace = model.forward(data.rows[start:start + batch_size], data.value[start:start + batch_size])
        arm = trace.arm if model.kind == "arm_plus" else trace
        mask = (arm.attention.gates > 0) & active_v
        flat = mask.reshape(-1, cfg.m)
        # pack each support pattern into one integer key
        keys = flat.astype(np.int64) @ (np.int64(1) << np.arange(cfg.m, dtype=np.int64)) \
            if cfg.m < 63 else None
        if keys is None:
            patterns = Counter(tuple(np.flatnonzero(r)) for r in flat)
        else:
            uniq, cnt = np.unique(keys, return_counts=True)
            patterns = Counter({
                tuple(j for j in range(cfg.m) if (int(u) >> j) & 1): int(c) for u, c in zip(uniq, cnt)
            })
        empty = patterns.pop((), 0)
        degenerate += empty
        counts.update(patterns)
    return TermCounts(counts, data.N, degenerate, cfg.K * cfg.o)


def interaction_catalog(data: Dataset, model: Model, top_n: int) -> list[InteractionTerm]:
    """The ``top_n`` most frequent captured field sets, by mean occurrences per instance."""
    if top_n <= 0:
        return []
    return count_interaction_terms(data, model).terms()[:top_n]
