"""Fully connected asset graph with transaction-cost edge weights."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

import numpy as np

from . import errors
from ._io import fmt_float, write_atomic

if TYPE_CHECKING:
    from .marketdata import PricePanel
    from .pathfinder import PathResult

COST_MODES = ("level-diff", "per-asset-change")


@dataclass(frozen=True, eq=False)
class AssetGraph:
    tickers: tuple
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tickers", tuple(self.tickers))
        w = np.array(self.weights, dtype=np.float64)
        n = len(self.tickers)
        if w.shape != (n, n):
            raise errors.ShapeMismatch(f"weights shape {w.shape} for {n} tickers")
        if len(set(self.tickers)) != n:
            raise errors.InputError("duplicate tickers")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return len(self.tickers)

    def index(self, ticker) -> int:
        try:
            return self.tickers.index(ticker)
        except ValueError:
            raise errors.UnknownTicker(ticker) from None

    def weight(self, a, b) -> float:
        return float(self.weights[self.index(a), self.index(b)])

    def reorder(self, tickers: Sequence[str]) -> "AssetGraph":
        perm = [self.index(t) for t in tickers]
        return AssetGraph(tuple(tickers), self.weights[np.ix_(perm, perm)])

    def edges(self):
        """Yield ``EdgeRecord`` for every unordered pair, canonical (sorted) order."""
        names = sorted(self.tickers)
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                yield EdgeRecord(a, b, self.weight(a, b))

    def __eq__(self, other):
        if not isinstance(other, AssetGraph) or set(self.tickers) != set(other.tickers):
            return NotImplemented if not isinstance(other, AssetGraph) else False
        return np.array_equal(self.weights, other.reorder(self.tickers).weights)

    __hash__ = None


@dataclass(frozen=True)
class EdgeRecord:
    source: str
    target: str
    cost: float


def symmetrize(weights: np.ndarray) -> np.ndarray:
    w = np.asarray(weights, dtype=np.float64)
    w = (w + w.T) / 2.0
    np.fill_diagonal(w, 0.0)
    return w


def adjacency_from_prices(closes: np.ndarray, mode: str = "level-diff") -> np.ndarray:
    """Cost matrix from a ``[T, n]`` block of prices.

    ``level-diff``: mean over t of |P_i(t) - P_j(t)|.
    ``per-asset-change``: average of the two assets' mean absolute daily change.
    """
    closes = np.asarray(closes, dtype=np.float64)
    if mode == "level-diff":
        if closes.shape[0] < 1:
            raise errors.TooFewRows("need at least 1 price row")
        w = np.abs(closes[:, :, None] - closes[:, None, :]).mean(axis=0)
    elif mode == "per-asset-change":
        if closes.shape[0] < 2:
            raise errors.TooFewRows("per-asset-change needs at least 2 price rows")
        vol = np.abs(np.diff(closes, axis=0)).mean(axis=0)
        w = 0.5 * (vol[:, None] + vol[None, :])
    else:
        raise ValueError(f"unknown cost mode {mode!r}")
    return symmetrize(w)


def build_adjacency(panel: "PricePanel", mode: str = "level-diff") -> AssetGraph:
    if len(panel.tickers) < 2:
        raise errors.TooFewAssets(f"need >= 2 assets, got {len(panel.tickers)}")
    if mode == "per-asset-change" and panel.num_dates < 2:
        raise errors.TooFewRows("per-asset-change needs at least 2 rows")
    if not np.isfinite(panel.closes).all():
        raise errors.InputError("panel has gaps; run fill_missing first")
    return AssetGraph(panel.tickers, adjacency_from_prices(panel.closes, mode))


@dataclass
class Violation:
    kind: str  # "asymmetry" | "diagonal" | "negative" | "non-finite"
    detail: str
    delta: float = 0.0


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        # truthy when something is wrong, like a non-empty list
        return bool(self.violations)

    def kinds(self) -> set:
        return {v.kind for v in self.violations}

    def __str__(self):
        return "; ".join(f"{v.kind}: {v.detail}" for v in self.violations) or "valid"


def validate_graph(g: AssetGraph) -> ValidationReport:
    w = g.weights
    report = ValidationReport()
    finite = np.isfinite(w)
    if not finite.all():
        bad = np.argwhere(~finite)
        report.violations.append(Violation("non-finite", f"{len(bad)} entries, first at {tuple(bad[0])}"))
    with np.errstate(invalid="ignore"):
        neg = w < 0
        if neg.any():
            report.violations.append(Violation("negative", f"{int(neg.sum())} entries, min {w[neg].min()!r}"))
        diag = np.diagonal(w)
        if np.any(diag != 0):
            i = int(np.flatnonzero(diag != 0)[0])
            report.violations.append(Violation("diagonal", f"weights[{i}][{i}] = {diag[i]!r}", float(abs(diag[i]))))
        asym = ~((w == w.T) | (np.isnan(w) & np.isnan(w.T)))
        if asym.any():
            delta = float(np.nanmax(np.abs(w - w.T)))
            i, j = np.argwhere(asym)[0]
            report.violations.append(
                Violation("asymmetry", f"max |A_ij - A_ji| = {delta!r} (first at {g.tickers[i]},{g.tickers[j]})", delta)
            )
    return report


def require_valid(g: AssetGraph) -> AssetGraph:
    report = validate_graph(g)
    if report:
        raise errors.InvalidGraph(str(report))
    return g


# -- rendering / serialization --------------------------------------------------

def _quote(name: str) -> str:
    return '"' + str(name).replace('"', '\\"') + '"'


def to_dot(g: AssetGraph, path: "PathResult | Sequence[str] | None" = None, name: str = "assets") -> str:
    """Undirected Graphviz text, edges labelled with costs to 4 decimals."""
    nodes = list(getattr(path, "nodes", path) or [])
    for t in nodes:
        if t not in g.tickers:
            raise errors.UnknownPathNode(f"path node {t!r} not in graph")
    on_path = {frozenset(p) for p in zip(nodes, nodes[1:])}

    lines = [f"graph {name} {{"]
    for t in sorted(g.tickers):
        style = ' [style=filled, fillcolor="lightblue"]' if t in nodes else ""
        lines.append(f"  {_quote(t)}{style};")
    for e in g.edges():
        attrs = [f'label="{e.cost:.4f}"']
        if frozenset((e.source, e.target)) in on_path:
            attrs += ['color="red"', "penwidth=3"]
        lines.append(f"  {_quote(e.source)} -- {_quote(e.target)} [{', '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def write_dot(g: AssetGraph, out, path=None) -> Path:
    return write_atomic(out, to_dot(g, path))


def format_edge_list(g: AssetGraph) -> str:
    lines = ["from,to,cost"]
    lines += [f"{e.source},{e.target},{fmt_float(e.cost)}" for e in g.edges() if math.isfinite(e.cost)]
    return "\n".join(lines) + "\n"


def write_edge_list(g: AssetGraph, out) -> Path:
    require_valid(g)
    return write_atomic(out, format_edge_list(g))


def read_edge_list(path, require_complete: bool = True, tickers: Sequence[str] | None = None) -> AssetGraph:
    """Parse a ``from,to,cost`` file into a graph with tickers in sorted order.

    With ``require_complete=False`` absent pairs get infinite weight (no edge).
    When ``tickers`` is given, every endpoint must belong to it.
    """
    path = Path(path)
    if not path.exists():
        raise errors.InputError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows or [c.strip().lower() for c in rows[0]] != ["from", "to", "cost"]:
        raise errors.CorruptFile(f"{path}: expected header from,to,cost")
    costs: dict[frozenset, float] = {}
    names: set = set()
    for k, row in enumerate(rows[1:], start=2):
        if len(row) != 3:
            raise errors.CorruptFile(f"{path}:{k}: expected 3 fields")
        a, b, c = row[0].strip(), row[1].strip(), row[2].strip()
        if a == b:
            raise errors.DuplicateEdge(f"{path}:{k}: self-loop on {a}")
        try:
            cost = float(c)
        except ValueError:
            raise errors.CorruptFile(f"{path}:{k}: bad cost {c!r}") from None
        if tickers is not None:
            for t in (a, b):
                if t not in tickers:
                    raise errors.UnknownTicker(t)
        key = frozenset((a, b))
        if key in costs:
            if costs[key] != cost:
                raise errors.AsymmetricInput(f"{path}:{k}: {a},{b} has costs {costs[key]!r} and {cost!r}")
            raise errors.DuplicateEdge(f"{path}:{k}: edge {a},{b} repeated")
        costs[key] = cost
        names.update((a, b))
    if tickers is not None:
        names.update(tickers)
    nodes = tuple(sorted(names))
    n = len(nodes)
    w = np.full((n, n), math.inf)
    np.fill_diagonal(w, 0.0)
    pos = {t: i for i, t in enumerate(nodes)}
    for key, cost in costs.items():
        a, b = sorted(key)
        w[pos[a], pos[b]] = w[pos[b], pos[a]] = cost
    if require_complete and len(costs) != n * (n - 1) // 2:
        raise errors.MissingEdge(f"{path}: {len(costs)} edges for {n} tickers, graph not complete")
    return AssetGraph(nodes, w)
