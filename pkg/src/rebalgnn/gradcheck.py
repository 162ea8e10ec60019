"""Central finite-difference check of the hand-written GNN gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gnn import TrainConfig, _forward, init_model, loss_and_grads, predict_normalized

FD_STEP = 1e-6
REL_TOL = 1e-4
# below this magnitude both gradients count as zero: the central difference
# carries O(step**2) ~ 1e-12 truncation error even when the loss is evaluated
# in extended precision
ABS_FLOOR = 1e-8
# inputs are redrawn until no rectifier sits this close to its kink, where the
# loss is not differentiable and a central difference straddles two slopes
KINK_MARGIN = 1e-4


@dataclass
class TrialResult:
    seed: int
    num_nodes: int
    window: int
    hidden: int
    num_layers: int
    aggregation: str
    max_rel_error: float
    worst_param: tuple  # (param index, flat index)


def _kink_distance(model, X) -> float:
    """Smallest |pre-activation| over every rectifier in the network."""
    _, cache = _forward(model, X)
    pres = [pre for _, pre in cache[2]] + [a for _, a, _ in cache[3]]
    return float(min(np.abs(p).min() for p in pres))


def _loss(model, X, Y):
    return np.mean((predict_normalized(model, X) - Y) ** 2)


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), ABS_FLOOR)
    return np.abs(analytic - numeric) / scale


def random_problem(seed: int, max_nodes: int = 5, max_window: int = 8, max_hidden: int = 8, batch: int = 2):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_nodes + 1))
    W = int(rng.integers(1, max_window + 1))
    hidden = int(rng.integers(2, max_hidden + 1))
    K = int(rng.integers(1, 3))
    agg = "sum" if seed % 2 == 0 else "mean"
    cfg = TrainConfig(hidden_dim=hidden, num_layers=K, aggregation=agg, seed=seed)
    model = init_model(cfg, W, n)
    # non-zero biases so every head parameter gets exercised
    params = model.params()
    params[-1] = rng.normal(size=params[-1].shape)
    params[-3] = rng.normal(scale=0.1, size=params[-3].shape)
    model = model.with_params(params)
    model.target_mean, model.target_std = float(rng.uniform(0.5, 2.0)), float(rng.uniform(0.5, 2.0))
    for _ in range(50):
        X = rng.normal(size=(batch, n, W))
        if _kink_distance(model, X) > KINK_MARGIN:
            break
    Y = rng.normal(size=(batch, n * (n - 1) // 2))
    return model, X, Y


def check_trial(seed: int, corrupt: bool = False, **dims) -> TrialResult:
    model, X, Y = random_problem(seed, **dims)
    _, grads = loss_and_grads(model, X, Y)
    if corrupt:
        grads[0] = grads[0] * 1.01 + 1e-3
    # oracle runs in long double so round-off does not swamp tiny gradients
    hp = np.longdouble
    params = [p.astype(hp) for p in model.params()]
    base = model.with_params(params)
    base.target_mean, base.target_std = hp(model.target_mean), hp(model.target_std)
    Xh, Yh = X.astype(hp), Y.astype(hp)
    worst, where = 0.0, (0, 0)
    for k, p in enumerate(params):
        numeric = np.zeros(p.size)
        flat = p.ravel()
        for i in range(p.size):
            orig = flat[i]
            plus = [q.copy() for q in params]
            plus[k].ravel()[i] = orig + FD_STEP
            minus = [q.copy() for q in params]
            minus[k].ravel()[i] = orig - FD_STEP
            lp = _loss(base.with_params(plus), Xh, Yh)
            lm = _loss(base.with_params(minus), Xh, Yh)
            numeric[i] = float((lp - lm) / (2 * hp(FD_STEP)))
        err = relative_error(grads[k].ravel(), numeric)
        if err.size and err.max() > worst:
            worst, where = float(err.max()), (k, int(err.argmax()))
    n, W = X.shape[1], X.shape[2]
    return TrialResult(seed, n, W, model.embed_dim, len(model.layers), model.aggregation, worst, where)


def run_gradcheck(trials: int = 100, seed: int = 0, corrupt: bool = False) -> list[TrialResult]:
    if trials < 1:
        raise ValueError("trials must be >= 1")
    return [check_trial(seed + t, corrupt=corrupt) for t in range(trials)]
