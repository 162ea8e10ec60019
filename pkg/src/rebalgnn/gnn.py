"""Message-passing GNN that regresses pairwise transaction costs.

Node update per layer (no bias, fully connected neighbourhood)::

    h_v <- relu( agg_{u != v} W_msg h_u + W_self h_v )

Edge cost for pair (i, j)::

    score = (head([h_i, h_j]) + head([h_j, h_i])) / 2
    cost  = target_std * softplus(score)

The loss is computed in z-scored target space, where the prediction is
``softplus(score) - target_mean / target_std``; that constant offset maps
normalized zero cost onto softplus zero, so currency predictions stay
non-negative while training still sees centred targets.

Gradients are derived by hand; see ``gradcheck`` for the finite-difference
harness that verifies them.
"""
from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import errors
from ._io import fmt_float, write_atomic
from .costgraph import AssetGraph
from .marketdata import FeatureWindow, NormalizationParams, Sample

MODEL_FORMAT = "rebalgnn.model"
MODEL_VERSION = 1
AGGREGATIONS = ("sum", "mean")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0
    hidden_dim: int = 16
    num_layers: int = 2
    aggregation: str = "sum"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 32
    minibatch_threshold: int = 1024

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.patience < 1 or self.max_epochs < 1:
            raise ValueError("patience and max_epochs must be >= 1")
        if self.hidden_dim < 1 or self.num_layers < 1 or self.batch_size < 1:
            raise ValueError("hidden_dim, num_layers and batch_size must be >= 1")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}")


@dataclass
class GnnLayerParams:
    W_msg: np.ndarray  # [d_out, d_in]
    W_self: np.ndarray  # [d_out, d_in]


@dataclass
class EdgeHeadParams:
    layers: list  # [(weight [d_out, d_in], bias [d_out]), ...], last d_out == 1


@dataclass
class GnnModel:
    layers: list
    edge_head: EdgeHeadParams
    aggregation: str = "sum"
    target_mean: float = 0.0
    target_std: float = 1.0
    feature_norm: NormalizationParams | None = None
    tickers: tuple = ()
    config: dict = field(default_factory=dict)

    @property
    def feature_dim(self) -> int:
        return self.layers[0].W_msg.shape[1]

    @property
    def embed_dim(self) -> int:
        return self.layers[-1].W_msg.shape[0]

    @property
    def offset(self) -> float:
        return -self.target_mean / self.target_std

    def params(self) -> list:
        out = []
        for layer in self.layers:
            out += [layer.W_msg, layer.W_self]
        for w, b in self.edge_head.layers:
            out += [w, b]
        return out

    def with_params(self, params: Sequence[np.ndarray]) -> "GnnModel":
        params = list(params)
        if len(params) != len(self.params()) or any(
            p.shape != q.shape for p, q in zip(params, self.params())
        ):
            raise errors.ShapeMismatch("parameter list does not match model")
        k = 2 * len(self.layers)
        layers = [GnnLayerParams(params[2 * i], params[2 * i + 1]) for i in range(len(self.layers))]
        head = EdgeHeadParams([(params[k + 2 * i], params[k + 2 * i + 1]) for i in range(len(self.edge_head.layers))])
        return replace(self, layers=layers, edge_head=head)

    def copy(self) -> "GnnModel":
        return self.with_params([p.copy() for p in self.params()])


def _glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    s = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-s, s, size=(fan_out, fan_in))


def init_model(cfg: TrainConfig, feature_dim: int, num_nodes: int | None = None) -> GnnModel:
    """Seeded Glorot-uniform weights; head biases start at zero."""
    if feature_dim < 1 or (num_nodes is not None and num_nodes < 1):
        raise ValueError("dimensions must be positive")
    rng = np.random.default_rng(cfg.seed)
    d = cfg.hidden_dim
    layers = []
    d_in = feature_dim
    for _ in range(cfg.num_layers):
        layers.append(GnnLayerParams(_glorot(rng, d, d_in), _glorot(rng, d, d_in)))
        d_in = d
    head = EdgeHeadParams([
        (_glorot(rng, d, 2 * d), np.zeros(d)),
        (_glorot(rng, 1, d), np.zeros(1)),
    ])
    return GnnModel(layers, head, aggregation=cfg.aggregation, config=asdict(cfg))


# -- forward / backward --------------------------------------------------------

def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return np.exp(-np.logaddexp(0.0, -x))


def _as_batch(model: GnnModel, features) -> np.ndarray:
    if isinstance(features, FeatureWindow):
        features = features.features
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 2:
        X = X[None]
    if X.ndim != 3 or X.shape[2] != model.feature_dim:
        raise errors.ShapeMismatch(f"features shape {X.shape} vs model feature dim {model.feature_dim}")
    return X


def _pair_index(n: int):
    return np.triu_indices(n, 1)


def _forward(model: GnnModel, X: np.ndarray):
    """Return (normalized predictions [B, P], cache for backward)."""
    B, n, _ = X.shape
    mean_agg = model.aggregation == "mean" and n > 1
    H = X
    layer_cache = []
    for layer in model.layers:
        M = H @ layer.W_msg.T
        nb = M.sum(axis=1, keepdims=True) - M
        if mean_agg:
            nb = nb / (n - 1)
        pre = nb + H @ layer.W_self.T
        layer_cache.append((H, pre))
        H = np.maximum(pre, 0.0)

    iu, ju = _pair_index(n)
    d = H.shape[2]
    hi, hj = H[:, iu, :], H[:, ju, :]
    (W1, b1), (W2, b2) = model.edge_head.layers
    head_cache = []
    outs = []
    for z in (np.concatenate([hi, hj], axis=2), np.concatenate([hj, hi], axis=2)):
        a = z @ W1.T + b1
        r = np.maximum(a, 0.0)
        outs.append((r @ W2.T + b2)[..., 0])
        head_cache.append((z, a, r))
    score = 0.5 * (outs[0] + outs[1])
    pred = _softplus(score) + model.offset
    return pred, (X, H, layer_cache, head_cache, score, iu, ju, d, mean_agg)


def _backward(model: GnnModel, cache, dpred: np.ndarray) -> list:
    X, H, layer_cache, head_cache, score, iu, ju, d, mean_agg = cache
    B, n, _ = X.shape
    (W1, b1), (W2, b2) = model.edge_head.layers
    dscore = dpred * _sigmoid(score)
    do = 0.5 * dscore  # same upstream gradient for both orderings
    gW1 = np.zeros_like(W1)
    gb1 = np.zeros_like(b1)
    gW2 = np.zeros_like(W2)
    gb2 = np.zeros_like(b2)
    dH = np.zeros_like(H)
    for k, (z, a, r) in enumerate(head_cache):
        gW2 += np.einsum("bp,bpk->k", do, r)[None, :]
        gb2 += do.sum()
        da = (do[..., None] * W2[0]) * (a > 0)
        gW1 += np.einsum("bpk,bpi->ki", da, z)
        gb1 += da.sum(axis=(0, 1))
        dz = da @ W1
        first, second = (iu, ju) if k == 0 else (ju, iu)
        # np.add.at: a node appears in many pairs
        np.add.at(dH, (slice(None), first), dz[..., :d])
        np.add.at(dH, (slice(None), second), dz[..., d:])

    layer_grads = []
    for layer, (Hin, pre) in zip(reversed(model.layers), reversed(layer_cache)):
        dpre = dH * (pre > 0)
        dnb = dpre / (n - 1) if mean_agg else dpre
        dM = dnb.sum(axis=1, keepdims=True) - dnb
        gWm = np.einsum("bno,bni->oi", dM, Hin)
        gWs = np.einsum("bno,bni->oi", dpre, Hin)
        dH = dM @ layer.W_msg + dpre @ layer.W_self
        layer_grads.append((gWm, gWs))

    grads = []
    for gWm, gWs in reversed(layer_grads):
        grads += [gWm, gWs]
    return grads + [gW1, gb1, gW2, gb2]


def loss_and_grads(model: GnnModel, X: np.ndarray, Y: np.ndarray):
    """MSE in normalized space over all samples and unordered pairs, plus gradients.

    ``X`` is ``[B, n, W]``; ``Y`` is ``[B, n(n-1)/2]`` normalized targets in
    ``triu_indices`` order.
    """
    pred, cache = _forward(model, X)
    if pred.shape != Y.shape:
        raise errors.ShapeMismatch(f"targets {Y.shape} vs predictions {pred.shape}")
    err = pred - Y
    loss = float(np.mean(err**2))
    grads = _backward(model, cache, 2.0 * err / err.size)
    return loss, grads


def forward_embeddings(model: GnnModel, features) -> np.ndarray:
    X = _as_batch(model, features)
    _, cache = _forward(model, X[:1])
    return cache[1][0]


def predict_normalized(model: GnnModel, features) -> np.ndarray:
    return _forward(model, _as_batch(model, features))[0]


def predict_edge_costs(model: GnnModel, features, tickers: Sequence[str] | None = None) -> AssetGraph:
    """Predicted cost graph in currency units for one feature window."""
    if tickers is None:
        tickers = getattr(features, "tickers", None) or model.tickers
    X = _as_batch(model, features)[:1]
    n = X.shape[1]
    if len(tickers) != n:
        raise errors.ShapeMismatch(f"{len(tickers)} tickers for {n} feature rows")
    _, cache = _forward(model, X)
    score = cache[4][0]
    costs = model.target_std * _softplus(score)
    w = np.zeros((n, n))
    iu, ju = _pair_index(n)
    w[iu, ju] = costs
    w[ju, iu] = costs
    return AssetGraph(tuple(tickers), w)


def graph_pairs(g: AssetGraph) -> np.ndarray:
    return g.weights[_pair_index(g.n)]


def mse_loss(predicted: AssetGraph, target: AssetGraph) -> float:
    """Mean squared error over the n(n-1)/2 unordered off-diagonal pairs."""
    if set(predicted.tickers) != set(target.tickers):
        raise errors.TickerMismatch(f"{predicted.tickers} vs {target.tickers}")
    target = target.reorder(predicted.tickers)
    if predicted.n < 2:
        return 0.0
    return float(np.mean((graph_pairs(predicted) - graph_pairs(target)) ** 2))


def normalize_targets(model: GnnModel, targets: np.ndarray) -> np.ndarray:
    return (np.asarray(targets, dtype=np.float64) - model.target_mean) / model.target_std


def backward(model: GnnModel, features, target: AssetGraph) -> list:
    """Gradients of the normalized-space MSE for one window against a currency target graph."""
    X = _as_batch(model, features)[:1]
    if target.n != X.shape[1]:
        raise errors.ShapeMismatch(f"target has {target.n} nodes, features {X.shape[1]}")
    Y = normalize_targets(model, graph_pairs(target))[None]
    return loss_and_grads(model, X, Y)[1]


# -- optimizer -------------------------------------------------------------------

@dataclass
class AdamState:
    m: list
    v: list
    step: int = 0

    @classmethod
    def zeros_like(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


def adam_step(model: GnnModel, grads: Sequence[np.ndarray], state: AdamState, cfg: TrainConfig):
    params = model.params()
    if len(grads) != len(params) or any(g.shape != p.shape for g, p in zip(grads, params)):
        raise errors.ShapeMismatch("gradients do not match parameters")
    t = state.step + 1
    b1, b2 = cfg.beta1, cfg.beta2
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        new_p.append(p - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps))
        new_m.append(m)
        new_v.append(v)
    return model.with_params(new_p), AdamState(new_m, new_v, t)


# -- training --------------------------------------------------------------------

@dataclass
class EpochRecord:
    epoch: int
    train_mse: float
    val_mse: float
    seconds: float


@dataclass
class TrainingLog:
    records: list = field(default_factory=list)
    best_epoch: int = 0
    stopped_early: bool = False

    def to_csv(self) -> str:
        lines = ["epoch,train_mse,val_mse,seconds"]
        lines += [f"{r.epoch},{fmt_float(r.train_mse)},{fmt_float(r.val_mse)},{r.seconds:.6f}" for r in self.records]
        return "\n".join(lines) + "\n"

    def mean_epoch_seconds(self) -> float:
        return float(np.mean([r.seconds for r in self.records])) if self.records else 0.0


def stack_samples(samples: Sequence[Sample]):
    """Features ``[B, n, W]`` and currency targets ``[B, P]``."""
    X = np.stack([s.window.features for s in samples])
    Y = np.stack([graph_pairs(s.target.reorder(s.window.tickers) if s.window.tickers else s.target) for s in samples])
    return X, Y


def _inverse_softplus(y: float) -> float:
    return y + math.log(-math.expm1(-y))


def _init_output_bias(model: GnnModel) -> None:
    """Start the head at the training-target mean: softplus(b) == mean / std."""
    ratio = model.target_mean / model.target_std
    if ratio > 1e-6:
        w, b = model.edge_head.layers[-1]
        model.edge_head.layers[-1] = (w, np.full_like(b, _inverse_softplus(ratio)))


def train(
    train_samples: Sequence[Sample],
    val_samples: Sequence[Sample],
    cfg: TrainConfig = TrainConfig(),
    feature_norm: NormalizationParams | None = None,
):
    """Adam on normalized-target MSE with early stopping on validation MSE.

    Returns the best-validation model and the per-epoch log. Raises
    ``DivergedLoss`` as soon as a loss turns non-finite.
    """
    if not train_samples or not val_samples:
        raise errors.EmptySplit("train and validation splits must be non-empty")
    X_tr, Y_tr = stack_samples(train_samples)
    X_va, Y_va = stack_samples(val_samples)

    model = init_model(cfg, X_tr.shape[2], X_tr.shape[1])
    pooled = Y_tr.ravel()
    model.target_mean = float(pooled.mean())
    model.target_std = float(max(pooled.std(), 1e-8))
    model.feature_norm = feature_norm
    model.tickers = tuple(train_samples[0].window.tickers)
    _init_output_bias(model)
    Yn_tr = normalize_targets(model, Y_tr)
    Yn_va = normalize_targets(model, Y_va)

    rng = np.random.default_rng([cfg.seed, 1])
    state = AdamState.zeros_like(model.params())
    log = TrainingLog()
    best, best_val, since = None, math.inf, 0
    n = len(X_tr)
    for epoch in range(1, cfg.max_epochs + 1):
        t0 = time.perf_counter()
        if n > cfg.minibatch_threshold:
            order = rng.permutation(n)
            batches = [order[i : i + cfg.batch_size] for i in range(0, n, cfg.batch_size)]
        else:
            batches = [slice(None)]
        with np.errstate(over="ignore", invalid="ignore"):
            for idx in batches:
                loss, grads = loss_and_grads(model, X_tr[idx], Yn_tr[idx])
                if not math.isfinite(loss):
                    raise errors.DivergedLoss(f"non-finite training loss at epoch {epoch}")
                model, state = adam_step(model, grads, state, cfg)
            train_mse = float(np.mean((predict_normalized(model, X_tr) - Yn_tr) ** 2))
            val_mse = float(np.mean((predict_normalized(model, X_va) - Yn_va) ** 2))
        if not (math.isfinite(train_mse) and math.isfinite(val_mse)):
            raise errors.DivergedLoss(f"non-finite loss at epoch {epoch}")
        log.records.append(EpochRecord(epoch, train_mse, val_mse, time.perf_counter() - t0))
        if val_mse < best_val:
            best, best_val, since = model.copy(), val_mse, 0
            log.best_epoch = epoch
        else:
            since += 1
            if since >= cfg.patience:
                log.stopped_early = True
                break
    return best, log


# -- persistence -----------------------------------------------------------------

def _arr(a: np.ndarray):
    return a.tolist()


def model_to_dict(model: GnnModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "config": model.config,
        "aggregation": model.aggregation,
        "tickers": list(model.tickers),
        "target_norm": {"mean": model.target_mean, "std": model.target_std},
        "feature_norm": model.feature_norm.to_dict() if model.feature_norm is not None else None,
        "layers": [{"W_msg": _arr(l.W_msg), "W_self": _arr(l.W_self)} for l in model.layers],
        "edge_head": [{"weight": _arr(w), "bias": _arr(b)} for w, b in model.edge_head.layers],
    }


def model_from_dict(d: dict) -> GnnModel:
    if d.get("format") != MODEL_FORMAT:
        raise errors.CorruptFile("not a model file")
    if d.get("version") != MODEL_VERSION:
        raise errors.VersionMismatch(f"model format version {d.get('version')!r}, expected {MODEL_VERSION}")
    try:
        layers = [GnnLayerParams(np.array(l["W_msg"], dtype=float), np.array(l["W_self"], dtype=float)) for l in d["layers"]]
        head = EdgeHeadParams([(np.array(h["weight"], dtype=float), np.array(h["bias"], dtype=float)) for h in d["edge_head"]])
        fn = d["feature_norm"]
        model = GnnModel(
            layers,
            head,
            aggregation=d["aggregation"],
            target_mean=float(d["target_norm"]["mean"]),
            target_std=float(d["target_norm"]["std"]),
            feature_norm=NormalizationParams.from_dict(fn) if fn is not None else None,
            tickers=tuple(d["tickers"]),
            config=dict(d["config"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise errors.CorruptFile(f"malformed model file: {exc}") from exc
    return model


def save_model(model: GnnModel, path) -> Path:
    return write_atomic(path, json.dumps(model_to_dict(model), indent=1, sort_keys=True) + "\n")


def load_model(path) -> GnnModel:
    path = Path(path)
    if not path.exists():
        raise errors.InputError(f"no such model file: {path}")
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise errors.CorruptFile(f"{path}: {exc}") from exc
    if not isinstance(d, dict):
        raise errors.CorruptFile(f"{path}: not a JSON object")
    return model_from_dict(d)


def train_config_from(d: dict) -> TrainConfig:
    names = {f.name for f in fields(TrainConfig)}
    return TrainConfig(**{k: v for k, v in d.items() if k in names})
