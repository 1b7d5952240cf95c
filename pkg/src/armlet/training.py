"""Loss, metrics, the mini-batch training loop and evaluation."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import Dataset
from .errors import MetricError, TrainingError
from .model import ArmConfig, Model
from .numeric import adam_step

log = logging.getLogger(__name__)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    return np.exp(-np.logaddexp(0.0, -z))


def logloss(logits, labels) -> float:
    """Mean binary cross entropy of sigmoid(logits), via log(1 + e^z) - y z."""
    z = np.asarray(logits, dtype=np.float64).reshape(-1)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if z.size == 0:
        raise ValueError("logloss of an empty batch")
    if z.shape != y.shape:
        raise ValueError(f"logloss length mismatch: {z.shape} vs {y.shape}")
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def logloss_grad(logits, labels) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64).reshape(z.shape)
    return (sigmoid(z) - y) / z.shape[0]


def _average_ranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    ranks = np.empty(len(x), dtype=np.float64)
    # boundaries of runs of equal scores
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    ends = np.r_[starts[1:], len(x)]
    avg = (starts + ends + 1) / 2.0
    ranks[order] = np.repeat(avg, ends - starts)
    return ranks


def auc(scores, labels) -> float:
    """ROC AUC as the normalised Mann-Whitney U; tied scores count one half."""
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if s.shape != y.shape:
        raise ValueError(f"auc length mismatch: {s.shape} vs {y.shape}")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise MetricError("AUC needs at least one positive and one negative label")
    ranks = _average_ranks(s)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass
class EvalReport:
    auc: float
    logloss: float
    n: int

    def to_json(self) -> dict:
        return asdict(self)


def evaluate(model: Model, data: Dataset, batch_size: int = 4096) -> EvalReport:
    if data.N == 0:
        raise MetricError("cannot evaluate an empty dataset")
    z = model.logits(data, batch_size)[:, 0]
    return EvalReport(auc(z, data.labels), logloss(z, data.labels), data.N)


@dataclass
class TrainConfig:
    lr: float = 1e-2
    batch_size: int = 256
    max_epochs: int = 20
    patience: int = 3
    eval_every: int | None = None
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not self.lr >= 0:
            raise ValueError("lr must be non-negative")
        if self.batch_size < 1 or self.patience < 1 or self.max_epochs < 1:
            raise ValueError("batch_size, patience and max_epochs must be >= 1")
        if self.eval_every is not None and self.eval_every < 1:
            raise ValueError("eval_every must be >= 1 steps")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class HistoryRecord:
    epoch: int
    step: int
    train_logloss: float
    valid_auc: float
    valid_logloss: float

    def to_json(self) -> dict:
        return asdict(self)


@dataclass
class TrainResult:
    model: Model
    history: list[HistoryRecord]
    best_valid_auc: float
    best_step: int
    stopped_early: bool = False
    extra: dict = field(default_factory=dict)


def train(
    model_kind: str,
    train_set: Dataset,
    valid_set: Dataset,
    cfg: ArmConfig,
    tcfg: TrainConfig,
    init_seed: int | None = None,
    model: Model | None = None,
    on_record=None,
) -> TrainResult:
    """Adam on mean logloss with early stopping on validation AUC.

    Validation runs once per epoch, or every ``tcfg.eval_every`` steps. When
    the validation AUC fails to improve for ``tcfg.patience`` consecutive
    evaluations training stops, and the returned model holds the parameters
    of the best evaluation. ``train_logloss`` in the history is the mean batch
    loss since the previous evaluation.
    """
    if model is None:
        seed = tcfg.seed if init_seed is None else init_seed
        model = Model.create(model_kind, cfg, train_set.schema, seed)
    model.unfreeze()
    store = model.store
    shuffle = np.random.default_rng([tcfg.seed, 1])
    dropout_rng = np.random.default_rng([tcfg.seed, 2])
    rows_all, vals_all, y_all = train_set.rows, train_set.value, train_set.labels

    history: list[HistoryRecord] = []
    best_auc, best_step, best_params = -np.inf, 0, store.snapshot()
    bad = 0
    step = 0
    losses: list[float] = []
    stop = False

    def checkpoint(epoch: int) -> bool:
        nonlocal best_auc, best_step, best_params, bad, losses
        rep = evaluate(model, valid_set)
        rec = HistoryRecord(epoch, step, float(np.mean(losses)) if losses else float("nan"),
                            rep.auc, rep.logloss)
        history.append(rec)
        if on_record is not None:
            on_record(rec)
        log.info("epoch %d step %d train_logloss %.5f valid_auc %.5f valid_logloss %.5f",
                 rec.epoch, rec.step, rec.train_logloss, rec.valid_auc, rec.valid_logloss)
        losses = []
        if rep.auc > best_auc:
            best_auc, best_step, best_params = rep.auc, step, store.snapshot()
            bad = 0
        else:
            bad += 1
        return bad >= tcfg.patience

    for epoch in range(1, tcfg.max_epochs + 1):
        perm = shuffle.permutation(train_set.N)
        for bi, start in enumerate(range(0, train_set.N, tcfg.batch_size)):
            idx = perm[start:start + tcfg.batch_size]
            trace = model.forward(rows_all[idx], vals_all[idx], train=True, rng=dropout_rng)
            loss = logloss(trace.logits[:, 0], y_all[idx])
            if not np.isfinite(loss):
                raise TrainingError("non-finite loss", {
                    "epoch": epoch, "batch": bi, "param_norms": store.param_norms()})
            losses.append(loss)
            dlogits = np.zeros_like(trace.logits)
            dlogits[:, 0] = logloss_grad(trace.logits[:, 0], y_all[idx])
            model.backward(trace, dlogits)
            try:
                adam_step(store, tcfg.lr, tcfg.beta1, tcfg.beta2, tcfg.eps)
            except ArithmeticError as exc:
                raise TrainingError(str(exc), {
                    "epoch": epoch, "batch": bi, "grad_norms": store.grad_norms()}) from exc
            step += 1
            if tcfg.eval_every and step % tcfg.eval_every == 0 and checkpoint(epoch):
                stop = True
                break
        if stop:
            break
        if not tcfg.eval_every and checkpoint(epoch):
            stop = True
            break

    store.load(best_params)
    return TrainResult(model, history, float(best_auc), best_step, stopped_early=stop)
