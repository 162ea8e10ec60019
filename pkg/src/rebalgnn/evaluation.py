"""Evaluation metrics and report emission."""
from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import errors
from ._io import fmt_float, write_atomic
from .costgraph import AssetGraph
from .gnn import mse_loss
from .pathfinder import PathResult, dijkstra


@dataclass(frozen=True)
class PortfolioPosition:
    tickers: tuple
    weights: np.ndarray  # portfolio fractions
    prices: np.ndarray
    unit_costs: np.ndarray  # cost per unit of each asset

    def validate(self):
        w = np.asarray(self.weights, dtype=float)
        p = np.asarray(self.prices, dtype=float)
        c = np.asarray(self.unit_costs, dtype=float)
        n = len(self.tickers)
        if not (w.shape == p.shape == c.shape == (n,)):
            raise errors.InvalidPosition("weights, prices and unit costs must each have one entry per ticker")
        if (w < 0).any() or abs(w.sum() - 1.0) > 1e-9:
            raise errors.InvalidPosition(f"weights must be >= 0 and sum to 1 (sum {w.sum()!r})")
        if not (p > 0).all() or (c < 0).any():
            raise errors.InvalidPosition("prices must be > 0 and unit costs >= 0")
        return w, p, c


def total_transaction_cost(position: PortfolioPosition) -> float:
    """Sum over assets of weight * price * per-unit cost."""
    w, p, c = position.validate()
    return float(np.sum(w * p * c))


def r_squared(predicted: Sequence[float], actual: Sequence[float]) -> float:
    pred = np.asarray(predicted, dtype=float).ravel()
    act = np.asarray(actual, dtype=float).ravel()
    if pred.shape != act.shape or act.size < 2:
        raise errors.LengthMismatch(f"need equal lengths >= 2, got {pred.size} and {act.size}")
    ss_tot = float(np.sum((act - act.mean()) ** 2))
    if ss_tot == 0.0:
        raise errors.ZeroVariance("actual series has zero variance")
    return 1.0 - float(np.sum((act - pred) ** 2)) / ss_tot


def pooled_mse(predicted: Sequence[AssetGraph], actual: Sequence[AssetGraph]) -> float:
    if len(predicted) != len(actual) or not predicted:
        raise errors.LengthMismatch("need matching non-empty graph lists")
    return float(np.mean([mse_loss(p, a) for p, a in zip(predicted, actual)]))


@dataclass(frozen=True)
class PairReduction:
    source: str
    target: str
    direct_cost: float
    optimized_cost: float
    reduction_pct: float
    steps: int
    note: str = ""


def cost_reduction(g: AssetGraph, pairs: Sequence[tuple] | None = None):
    """Percent saved by the routed path against the direct edge, per pair and on average.

    ``pairs`` defaults to every unordered pair in sorted ticker order.
    Returns ``(per_pair, average_pct)``.
    """
    if pairs is None:
        names = sorted(g.tickers)
        pairs = [(a, b) for i, a in enumerate(names) for b in names[i + 1 :]]
    out = []
    for a, b in pairs:
        if a == b:
            raise errors.ValidationError(f"pair {a},{b} has identical endpoints")
        direct = g.weight(a, b)
        res = dijkstra(g, a, b)
        if direct == 0.0:
            out.append(PairReduction(a, b, direct, res.total_cost, 0.0, res.steps, "ZeroDirectCost"))
            continue
        pct = 100.0 * (1.0 - res.total_cost / direct)
        out.append(PairReduction(a, b, direct, res.total_cost, max(pct, 0.0), res.steps))
    avg = float(np.mean([r.reduction_pct for r in out])) if out else 0.0
    return out, avg


def path_efficiency(results: Sequence[PathResult]):
    """Mean step count and a ``{steps: count}`` histogram."""
    if not results:
        raise errors.EmptyInput("no path results")
    steps = [r.steps for r in results]
    return float(np.mean(steps)), dict(sorted(Counter(steps).items()))


@dataclass
class MetricsReport:
    mse_normalized: float
    mse_currency: float
    r2: float
    avg_cost_reduction_pct: float
    avg_path_steps: float
    runtimes: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        extra = d.pop("extra")
        d.update(extra)
        return d


def pair_label(a: str, b: str) -> str:
    a, b = sorted((a, b))
    return f"{a}-{b}"


@dataclass(frozen=True)
class SeriesRow:
    date: str
    pair: str
    actual: float
    predicted: float


def series_rows(dates: Sequence[str], actual: Sequence[AssetGraph], predicted: Sequence[AssetGraph]) -> list:
    rows = []
    for d, act, pred in zip(dates, actual, predicted):
        for e in act.edges():
            rows.append(SeriesRow(d, pair_label(e.source, e.target), e.cost, pred.weight(e.source, e.target)))
    return rows


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def emit_report(metrics: MetricsReport, series: Sequence[SeriesRow], out_dir) -> tuple[Path, Path]:
    """Write ``report.json`` and ``series.csv``; identical inputs give identical bytes."""
    out_dir = Path(out_dir)
    report = write_atomic(
        out_dir / "report.json", json.dumps(_json_safe(metrics.to_dict()), indent=2, sort_keys=True) + "\n"
    )
    lines = ["date,pair,actual,predicted"]
    lines += [f"{r.date},{r.pair},{fmt_float(r.actual)},{fmt_float(r.predicted)}" for r in series]
    csv_path = write_atomic(out_dir / "series.csv", "\n".join(lines) + "\n")
    return report, csv_path
