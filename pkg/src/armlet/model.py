"""ARM and its baselines: forward passes with hand-derived backward passes.

Every model maps a batch of embedding rows ``rows`` (B, m) and field values
``vals`` (B, m) to raw logits (B, n_p); sigmoids are applied only by the loss
and the metrics. Parameters live in a :class:`~armlet.numeric.ParamStore`
under dotted names (``arm.*``, ``dnn.*``, ``ens.*``, ``lr.*``, ``fm.*``,
``xn.*``) and backward passes accumulate into ``store.grads``.

Shapes used throughout: B batch, m fields, n_e embedding size, K heads,
o exponential neurons per head.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .data import Dataset, Instance, Schema
from .errors import ContractError, ForwardError, ShapeError
from .numeric import ParamStore
from .sparse_softmax import entmax, entmax_jvp

MODEL_KINDS = ("arm", "arm_plus", "lr", "fm", "fm_plus", "dnn")
INIT_STD = 0.01


@dataclass
class ArmConfig:
    m: int
    n_e: int = 10
    K: int = 1
    o: int = 8
    alpha: float = 1.7
    mlp_widths: tuple[int, ...] = (64,)
    n_h: int = 32
    n_p: int = 1
    exp_clamp: float = 15.0
    dnn_widths: tuple[int, ...] = (64,)
    dropout: float = 0.0
    fm_neurons: int = 1

    def __post_init__(self):
        self.mlp_widths = tuple(int(w) for w in self.mlp_widths)
        self.dnn_widths = tuple(int(w) for w in self.dnn_widths)
        checks = [
            (self.m >= 1, "m >= 1"),
            (self.K >= 1, "K >= 1"),
            (self.o >= 1, "o >= 1"),
            (self.n_e >= 1, "n_e >= 1"),
            (self.n_p >= 1, "n_p >= 1"),
            (self.n_h >= 1, "n_h >= 1"),
            (self.alpha >= 1.0, "alpha >= 1"),
            (self.exp_clamp > 0, "exp_clamp > 0"),
            (0.0 <= self.dropout < 1.0, "dropout in [0, 1)"),
            (self.fm_neurons >= 0, "fm_neurons >= 0"),
            (all(w >= 1 for w in self.mlp_widths + self.dnn_widths), "layer widths >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(f"invalid ArmConfig: need {msg}")

    def to_json(self) -> dict:
        d = asdict(self)
        d["mlp_widths"] = list(self.mlp_widths)
        d["dnn_widths"] = list(self.dnn_widths)
        return d

    @classmethod
    def from_json(cls, d: dict) -> "ArmConfig":
        return cls(**d)


# -- building blocks ----------------------------------------------------------

def _finite(x: np.ndarray, layer: str) -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise ForwardError("non-finite activation", layer)
    return x


def embed_fields(table: np.ndarray, rows: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Look up field embeddings and scale them by the field values.

    Categorical fields carry value 1, so their row is a plain lookup;
    numerical fields own one row which is multiplied by the scaled value.
    """
    if rows.size and (rows.min() < 0 or rows.max() >= table.shape[0]):
        raise IndexError(f"embedding row outside [0, {table.shape[0]})")
    return table[rows] * vals[..., None]


def embed_backward(grad_table: np.ndarray, dE: np.ndarray, rows: np.ndarray, vals: np.ndarray) -> None:
    n_e = grad_table.shape[1]
    np.add.at(grad_table, rows.reshape(-1), (dE * vals[..., None]).reshape(-1, n_e))


def query_projection(Q: np.ndarray, W_att: np.ndarray) -> np.ndarray:
    """P[k, i] = q_i^T W_att for every head k and neuron i, shape (K, o, n_e)."""
    return np.matmul(Q.transpose(0, 2, 1), W_att)


@dataclass
class AttentionCache:
    E_x: np.ndarray
    P: np.ndarray
    Vt: np.ndarray
    scores: np.ndarray
    gates: np.ndarray
    weights: np.ndarray
    alpha: float


def gated_attention(E_x, Q, W_att, V, alpha, P=None) -> AttentionCache:
    """Bilinear alignment scores, entmax gates and gated interaction weights.

    E_x (B, m, n_e); Q (K, n_e, o); W_att (K, n_e, n_e); V (K, m, o).
    Returns scores, gates and weights of shape (B, K*o, m), neuron-major
    within each head. ``P`` may be passed to reuse a precomputed projection.
    """
    K, n_e, o = Q.shape
    m = E_x.shape[1]
    if V.shape != (K, m, o) or W_att.shape != (K, n_e, n_e) or E_x.shape[2] != n_e:
        raise ShapeError(f"attention shapes disagree: E_x {E_x.shape}, Q {Q.shape}, "
                         f"W_att {W_att.shape}, V {V.shape}")
    if P is None:
        P = query_projection(Q, W_att)
    P2 = P.reshape(K * o, n_e)
    scores = np.matmul(P2, E_x.transpose(0, 2, 1))
    gates = entmax(scores, alpha)
    Vt = V.transpose(0, 2, 1).reshape(K * o, m)
    weights = gates * Vt
    return AttentionCache(E_x, P, Vt, scores, gates, weights, alpha)


def gated_attention_backward(cache: AttentionCache, dweights: np.ndarray):
    """Returns (dE_x, dQ, dW_att, dV) given d loss / d weights."""
    K, o, n_e = cache.P.shape
    m = cache.E_x.shape[1]
    dgates = dweights * cache.Vt
    dVt = np.einsum("bij,bij->ij", dweights, cache.gates)
    dV = dVt.reshape(K, o, m).transpose(0, 2, 1)
    dscores = entmax_jvp(cache.gates, cache.alpha, dgates)
    P2 = cache.P.reshape(K * o, n_e)
    dE_x = np.matmul(dscores.transpose(0, 2, 1), P2)
    dP = np.einsum("bij,bjf->if", dscores, cache.E_x).reshape(K, o, n_e)
    return dE_x, dscores, dP, dV


def projection_backward(Q: np.ndarray, W_att: np.ndarray, dP: np.ndarray):
    dQ = np.matmul(W_att, dP.transpose(0, 2, 1))
    dW = np.matmul(Q, dP)
    return dQ, dW


def exponential_neurons(E_x: np.ndarray, w: np.ndarray, clamp: float):
    """y_i = exp(sum_j w_ij e_j), with the exponent clamped to [-clamp, clamp].

    E_x (B, m, n_e), w (B, n, m) -> (Y, s) both (B, n, n_e), where s is the
    unclamped exponent kept for the backward pass.
    """
    s = np.matmul(w, E_x)
    Y = np.exp(np.clip(s, -clamp, clamp))
    return Y, s


def exponential_neurons_backward(dY, Y, s, E_x, w, clamp):
    """dy_i/de_j = diag(w_ij y_i) and dy_i/dw_ij = y_i * e_j; clamped entries pass nothing."""
    ds = dY * Y * (np.abs(s) < clamp)
    dw = np.matmul(ds, E_x.transpose(0, 2, 1))
    dE_x = np.matmul(w.transpose(0, 2, 1), ds)
    return dE_x, dw


def affine(x: np.ndarray, W: np.ndarray, exact: bool = False) -> np.ndarray:
    """x @ W for a (B, d) batch.

    With ``exact`` every row is its own product, so a row's result does not
    depend on the batch it sits in (2-D BLAS kernels change summation order
    with the batch size). Eval-mode passes use it to keep batched and
    per-instance outputs bit-identical.
    """
    if not exact:
        return x @ W
    if W.ndim == 1:
        return (x[:, None, :] @ W[:, None])[:, 0, 0]
    return (x[:, None, :] @ W)[:, 0, :]


@dataclass
class DenseCache:
    inputs: list = field(default_factory=list)
    pre: list = field(default_factory=list)
    masks: list = field(default_factory=list)


def relu_stack(x, store: ParamStore, prefix: str, n_layers: int, dropout: float, rng, train: bool):
    """ReLU layers ``prefix``W{l}/b{l}; dropout on each output in train mode only."""
    cache = DenseCache()
    for l in range(n_layers):
        W = store.params[f"{prefix}W{l}"]
        b = store.params[f"{prefix}b{l}"]
        cache.inputs.append(x)
        pre = affine(x, W, exact=not train) + b
        cache.pre.append(pre)
        x = np.maximum(pre, 0.0)
        if train and dropout > 0.0:
            if rng is None:
                raise ContractError("dropout in train mode needs an rng")
            mask = (rng.random(x.shape) >= dropout) / (1.0 - dropout)
            x = x * mask
        else:
            mask = None
        cache.masks.append(mask)
        _finite(x, f"{prefix}relu{l}")
    return x, cache


def relu_stack_backward(dx, cache: DenseCache, store: ParamStore, prefix: str):
    for l in reversed(range(len(cache.pre))):
        if cache.masks[l] is not None:
            dx = dx * cache.masks[l]
        dpre = dx * (cache.pre[l] > 0)
        store.grads[f"{prefix}W{l}"] += cache.inputs[l].T @ dpre
        store.grads[f"{prefix}b{l}"] += dpre.sum(axis=0)
        dx = dpre @ store.params[f"{prefix}W{l}"].T
    return dx


# -- initialisation -------------------------------------------------------------

def _xavier(rng, fan_in: int, fan_out: int, shape=None):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape or (fan_in, fan_out))


def _normal(rng, shape):
    return rng.normal(0.0, INIT_STD, size=shape)


def _add_relu_stack(store, rng, prefix, d_in, widths):
    for l, w in enumerate(widths):
        store.add(f"{prefix}W{l}", _xavier(rng, d_in, w))
        store.add(f"{prefix}b{l}", np.zeros(w))
        d_in = w
    return d_in


def _add_arm(store, rng, cfg: ArmConfig, n_rows: int):
    K, o, n_e, m = cfg.K, cfg.o, cfg.n_e, cfg.m
    store.add("arm.emb", _normal(rng, (n_rows, n_e)))
    store.add("arm.Q", _normal(rng, (K, n_e, o)))
    store.add("arm.W_att", np.stack([_xavier(rng, n_e, n_e) for _ in range(K)]))
    store.add("arm.V", _normal(rng, (K, m, o)))
    d = _add_relu_stack(store, rng, "arm.mlp.", K * o * n_e, cfg.mlp_widths + (cfg.n_h,))
    store.add("arm.W_p", _xavier(rng, d, cfg.n_p).T)
    store.add("arm.b_p", np.zeros(cfg.n_p))


def _add_dnn(store, rng, cfg: ArmConfig, n_rows: int):
    store.add("dnn.emb", _normal(rng, (n_rows, cfg.n_e)))
    d = _add_relu_stack(store, rng, "dnn.", cfg.m * cfg.n_e, cfg.dnn_widths)
    store.add("dnn.W_out", _xavier(rng, d, cfg.n_p))
    store.add("dnn.b_out", np.zeros(cfg.n_p))


def init_params(kind: str, cfg: ArmConfig, schema: Schema, seed: int) -> ParamStore:
    """Fresh parameters for ``kind``; deterministic for a given seed.

    Embeddings, query and value vectors ~ N(0, 0.01^2); weight matrices
    Xavier-uniform; biases zero; ensemble weights w1 = w2 = 0.5, b_f = 0.
    """
    if kind not in MODEL_KINDS:
        raise ValueError(f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    if cfg.m != schema.m:
        raise ShapeError(f"config has m={cfg.m} but schema has {schema.m} fields")
    rng = np.random.default_rng(seed)
    store = ParamStore()
    n_rows = schema.n_rows
    if kind in ("arm", "arm_plus"):
        _add_arm(store, rng, cfg, n_rows)
    if kind in ("dnn", "arm_plus"):
        _add_dnn(store, rng, cfg, n_rows)
    if kind == "arm_plus":
        store.add("ens.w1", [0.5])
        store.add("ens.w2", [0.5])
        store.add("ens.b_f", np.zeros(cfg.n_p))
    if kind in ("lr", "fm", "fm_plus"):
        if cfg.n_p != 1:
            raise ValueError(f"{kind} supports a single prediction target")
        store.add("lr.w", _normal(rng, n_rows))
        store.add("lr.b", [0.0])
    if kind in ("fm", "fm_plus"):
        store.add("fm.v", _normal(rng, (n_rows, cfg.n_e)))
    if kind == "fm_plus" and cfg.fm_neurons > 0:
        o, n_e = cfg.fm_neurons, cfg.n_e
        store.add("xn.Q", _normal(rng, (1, n_e, o)))
        store.add("xn.W_att", _xavier(rng, n_e, n_e)[None])
        store.add("xn.V", _normal(rng, (1, cfg.m, o)))
        store.add("xn.W_r", _xavier(rng, o * n_e, 1).ravel())
    return store


# -- ARM ---------------------------------------------------------------------

@dataclass
class ArmTrace:
    """Intermediates of one ARM forward pass (batched)."""

    rows: np.ndarray
    vals: np.ndarray
    attention: AttentionCache
    s: np.ndarray
    Y: np.ndarray
    mlp: DenseCache
    h: np.ndarray
    logits: np.ndarray
    train: bool

    @property
    def E_x(self):
        return self.attention.E_x

    def _heads(self, x):
        B, _, last = x.shape
        K, o = self.attention.P.shape[:2]
        return x.reshape(B, K, o, last)

    @property
    def scores(self):
        return self._heads(self.attention.scores)

    @property
    def gates(self):
        return self._heads(self.attention.gates)

    @property
    def weights(self):
        return self._heads(self.attention.weights)

    @property
    def neurons(self):
        return self._heads(self.Y)


def arm_forward(store: ParamStore, cfg: ArmConfig, rows, vals, train=False, rng=None, P=None) -> ArmTrace:
    E_x = embed_fields(store.params["arm.emb"], rows, vals)
    att = gated_attention(E_x, store.params["arm.Q"], store.params["arm.W_att"],
                          store.params["arm.V"], cfg.alpha, P=P)
    Y, s = exponential_neurons(E_x, att.weights, cfg.exp_clamp)
    _finite(Y, "arm.neurons")
    y = Y.reshape(len(rows), -1)
    h, mlp = relu_stack(y, store, "arm.mlp.", len(cfg.mlp_widths) + 1, cfg.dropout, rng, train)
    logits = _finite(affine(h, store.params["arm.W_p"].T, exact=not train) + store.params["arm.b_p"],
                     "arm.predict")
    return ArmTrace(rows, vals, att, s, Y, mlp, h, logits, train)


def arm_backward(trace: ArmTrace, dlogits: np.ndarray, store: ParamStore, cfg: ArmConfig) -> None:
    if trace.mlp is None or trace.attention is None:
        raise ContractError("trace is missing intermediates")
    g = store.grads
    g["arm.W_p"] += dlogits.T @ trace.h
    g["arm.b_p"] += dlogits.sum(axis=0)
    dh = dlogits @ store.params["arm.W_p"]
    dy = relu_stack_backward(dh, trace.mlp, store, "arm.mlp.")
    dY = dy.reshape(trace.Y.shape)
    att = trace.attention
    dE_x, dw = exponential_neurons_backward(dY, trace.Y, trace.s, att.E_x, att.weights, cfg.exp_clamp)
    dE_att, _, dP, dV = gated_attention_backward(att, dw)
    dE_x += dE_att
    dQ, dW = projection_backward(store.params["arm.Q"], store.params["arm.W_att"], dP)
    g["arm.V"] += dV
    g["arm.Q"] += dQ
    g["arm.W_att"] += dW
    embed_backward(g["arm.emb"], dE_x, trace.rows, trace.vals)


# -- DNN -------------------------------------------------------------------------

@dataclass
class DnnTrace:
    rows: np.ndarray
    vals: np.ndarray
    hidden: DenseCache
    top: np.ndarray
    logits: np.ndarray


def dnn_forward(store: ParamStore, cfg: ArmConfig, rows, vals, train=False, rng=None) -> DnnTrace:
    E_x = embed_fields(store.params["dnn.emb"], rows, vals)
    x = E_x.reshape(len(rows), -1)
    top, hidden = relu_stack(x, store, "dnn.", len(cfg.dnn_widths), cfg.dropout, rng, train)
    logits = _finite(affine(top, store.params["dnn.W_out"], exact=not train) + store.params["dnn.b_out"],
                     "dnn.out")
    return DnnTrace(rows, vals, hidden, top, logits)


def dnn_backward(trace: DnnTrace, dlogits, store: ParamStore, cfg: ArmConfig) -> None:
    store.grads["dnn.W_out"] += trace.top.T @ dlogits
    store.grads["dnn.b_out"] += dlogits.sum(axis=0)
    dtop = dlogits @ store.params["dnn.W_out"].T
    dx = relu_stack_backward(dtop, trace.hidden, store, "dnn.")
    dE = dx.reshape(len(trace.rows), cfg.m, cfg.n_e)
    embed_backward(store.grads["dnn.emb"], dE, trace.rows, trace.vals)


# -- LR / FM / FM + exponential neurons ------------------------------------------

@dataclass
class FmTrace:
    rows: np.ndarray
    vals: np.ndarray
    E_x: np.ndarray | None
    total: np.ndarray | None
    attention: AttentionCache | None
    Y: np.ndarray | None
    s: np.ndarray | None
    logits: np.ndarray


def lr_logits(store, rows, vals):
    return (store.params["lr.w"][rows] * vals).sum(axis=1, keepdims=True) + store.params["lr.b"]


def fm_pairwise(E_x: np.ndarray) -> np.ndarray:
    """sum_{i<j} <e_i, e_j> via 0.5 * ((sum e)^2 - sum e^2), per instance."""
    total = E_x.sum(axis=1)
    return 0.5 * ((total * total).sum(axis=1) - (E_x * E_x).sum(axis=(1, 2)))


def fm_forward(store: ParamStore, cfg: ArmConfig | None, rows, vals, neurons=False) -> FmTrace:
    logits = lr_logits(store, rows, vals)
    E_x = total = att = Y = s = None
    if "fm.v" in store:
        E_x = embed_fields(store.params["fm.v"], rows, vals)
        total = E_x.sum(axis=1)
        logits = logits + fm_pairwise(E_x)[:, None]
        if neurons and "xn.Q" in store:
            att = gated_attention(E_x, store.params["xn.Q"], store.params["xn.W_att"],
                                  store.params["xn.V"], cfg.alpha)
            Y, s = exponential_neurons(E_x, att.weights, cfg.exp_clamp)
            _finite(Y, "xn.neurons")
            logits = logits + affine(Y.reshape(len(rows), -1), store.params["xn.W_r"], exact=True)[:, None]
    return FmTrace(rows, vals, E_x, total, att, Y, s, _finite(logits, "fm.out"))


def fm_backward(trace: FmTrace, dlogits, store: ParamStore, cfg: ArmConfig | None) -> None:
    d = dlogits[:, 0]
    g = store.grads
    np.add.at(g["lr.w"], trace.rows.reshape(-1), (d[:, None] * trace.vals).reshape(-1))
    g["lr.b"] += d.sum()
    if trace.E_x is None:
        return
    dE_x = d[:, None, None] * (trace.total[:, None, :] - trace.E_x)
    if trace.Y is not None:
        B = len(trace.rows)
        g["xn.W_r"] += trace.Y.reshape(B, -1).T @ d
        dY = (d[:, None] * store.params["xn.W_r"][None, :]).reshape(trace.Y.shape)
        att = trace.attention
        dE_n, dw = exponential_neurons_backward(dY, trace.Y, trace.s, trace.E_x, att.weights, cfg.exp_clamp)
        dE_a, _, dP, dV = gated_attention_backward(att, dw)
        dQ, dW = projection_backward(store.params["xn.Q"], store.params["xn.W_att"], dP)
        g["xn.V"] += dV
        g["xn.Q"] += dQ
        g["xn.W_att"] += dW
        dE_x = dE_x + dE_n + dE_a
    embed_backward(g["fm.v"], dE_x, trace.rows, trace.vals)


# -- model objects ------------------------------------------------------------------

@dataclass
class EnsembleTrace:
    arm: ArmTrace
    dnn: DnnTrace
    logits: np.ndarray


class Model:
    """A trainable model of one kind with its parameter store.

    ``forward`` returns a trace whose ``logits`` has shape (B, n_p);
    ``backward`` accumulates gradients of a loss with upstream gradient
    ``dlogits`` into ``store.grads``.
    """

    def __init__(self, kind: str, cfg: ArmConfig, schema: Schema, store: ParamStore):
        if kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {kind!r}")
        self.kind = kind
        self.cfg = cfg
        self.schema = schema
        self.store = store
        self._P: np.ndarray | None = None

    @classmethod
    def create(cls, kind: str, cfg: ArmConfig, schema: Schema, seed: int = 0) -> "Model":
        return cls(kind, cfg, schema, init_params(kind, cfg, schema, seed))

    @property
    def has_arm(self) -> bool:
        return self.kind in ("arm", "arm_plus")

    # The eval-time cache of q_i^T W_att per head; must be refreshed after
    # any parameter change, so training never uses it.
    def freeze(self) -> "Model":
        if self.has_arm:
            self._P = query_projection(self.store["arm.Q"], self.store["arm.W_att"])
        return self

    def unfreeze(self) -> "Model":
        self._P = None
        return self

    def forward(self, rows, vals, train: bool = False, rng=None):
        rows = np.asarray(rows, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != self.cfg.m or vals.shape != rows.shape:
            raise ShapeError(f"batch must be (B, {self.cfg.m}); got rows {rows.shape}, vals {vals.shape}")
        store, cfg = self.store, self.cfg
        P = None if train else self._P
        if self.kind == "arm":
            return arm_forward(store, cfg, rows, vals, train, rng, P=P)
        if self.kind == "dnn":
            return dnn_forward(store, cfg, rows, vals, train, rng)
        if self.kind == "arm_plus":
            a = arm_forward(store, cfg, rows, vals, train, rng, P=P)
            d = dnn_forward(store, cfg, rows, vals, train, rng)
            logits = store["ens.w1"] * a.logits + store["ens.w2"] * d.logits + store["ens.b_f"]
            return EnsembleTrace(a, d, logits)
        if self.kind == "lr":
            return FmTrace(rows, vals, None, None, None, None, None, lr_logits(store, rows, vals))
        return fm_forward(store, cfg, rows, vals, neurons=self.kind == "fm_plus")

    def backward(self, trace, dlogits) -> None:
        dlogits = np.asarray(dlogits, dtype=np.float64).reshape(trace.logits.shape)
        store, cfg = self.store, self.cfg
        if self.kind == "arm":
            arm_backward(trace, dlogits, store, cfg)
        elif self.kind == "dnn":
            dnn_backward(trace, dlogits, store, cfg)
        elif self.kind == "arm_plus":
            g = store.grads
            g["ens.w1"] += (dlogits * trace.arm.logits).sum()
            g["ens.w2"] += (dlogits * trace.dnn.logits).sum()
            g["ens.b_f"] += dlogits.sum(axis=0)
            arm_backward(trace.arm, dlogits * store["ens.w1"], store, cfg)
            dnn_backward(trace.dnn, dlogits * store["ens.w2"], store, cfg)
        else:
            fm_backward(trace, dlogits, store, cfg)

    def logits(self, data: Dataset, batch_size: int = 4096) -> np.ndarray:
        """Eval-mode logits for a whole dataset, shape (N, n_p)."""
        rows, vals = data.rows, data.value
        out = [self.forward(rows[i:i + batch_size], vals[i:i + batch_size]).logits
               for i in range(0, data.N, batch_size)]
        if not out:
            return np.zeros((0, self.cfg.n_p))
        return np.concatenate(out)

    def instance_batch(self, instance: Instance | Sequence[Instance]):
        insts = [instance] if isinstance(instance, Instance) else list(instance)
        ds = Dataset.from_instances(self.schema, insts)
        return ds.rows, ds.value

    def predict_instance(self, instance: Instance) -> np.ndarray:
        rows, vals = self.instance_batch(instance)
        return self.forward(rows, vals).logits[0]

    def trace_instance(self, instance: Instance):
        rows, vals = self.instance_batch(instance)
        return self.forward(rows, vals)


def transplant_neurons(arm: Model, cfg: ArmConfig, seed: int = 0) -> Model:
    """An fm_plus model seeded with the strongest interaction neurons of a trained ARM model.

    The FM embedding table starts as a copy of the ARM embeddings, and
    the ``cfg.fm_neurons`` neurons with the largest value mass sum_j |v_ij|
    are carried over. Each carries its projected query q_i^T W_att as the
    bank's query (with an identity bilinear map) and its value vector v_i,
    so the transplanted bank initially computes the same interaction terms.
    The readout ``xn.W_r`` keeps its fresh initialisation.
    """
    if not arm.has_arm:
        raise ValueError(f"need an ARM model to transplant from, got {arm.kind!r}")
    if (cfg.m, cfg.n_e) != (arm.cfg.m, arm.cfg.n_e):
        raise ShapeError("fm_plus config must share m and n_e with the source model")
    if cfg.fm_neurons > arm.cfg.K * arm.cfg.o:
        raise ValueError(f"cannot transplant {cfg.fm_neurons} of {arm.cfg.K * arm.cfg.o} neurons")
    src = arm.store
    model = Model.create("fm_plus", cfg, arm.schema, seed)
    model.store["fm.v"][...] = src["arm.emb"]
    n = cfg.fm_neurons
    if n:
        n_e = cfg.n_e
        P = query_projection(src["arm.Q"], src["arm.W_att"]).reshape(-1, n_e)
        V = src["arm.V"].transpose(0, 2, 1).reshape(-1, cfg.m)
        sel = np.argsort(-np.abs(V).sum(axis=1), kind="stable")[:n]
        model.store["xn.Q"][...] = P[sel].T[None]
        model.store["xn.W_att"][...] = np.eye(n_e)[None]
        model.store["xn.V"][...] = V[sel].T[None]
    return model
