"""Minimum-cost rebalancing paths over an asset cost graph.

Ties between equal-cost paths go to the lexicographically smallest ticker
sequence, so results are reproducible and comparable against the brute-force
enumerator.
"""
from __future__ import annotations

import heapq
import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from . import errors
from .costgraph import AssetGraph

BRUTE_FORCE_MAX_NODES = 8


@dataclass(frozen=True)
class PathResult:
    nodes: tuple
    total_cost: float

    @property
    def steps(self) -> int:
        return len(self.nodes) - 1

    def to_dict(self) -> dict:
        return {"path": list(self.nodes), "total_cost": self.total_cost, "steps": self.steps}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "PathResult":
        return cls(tuple(d["path"]), float(d["total_cost"]))


def path_cost(g: AssetGraph, nodes) -> float:
    """Left-to-right sum of edge weights, the same order Dijkstra accumulates in."""
    cost = 0.0
    for a, b in zip(nodes, nodes[1:]):
        cost = cost + g.weights[g.index(a), g.index(b)]
    return float(cost)


def dijkstra(g: AssetGraph, source, target) -> PathResult:
    s, t = g.index(source), g.index(target)
    names = g.tickers
    w = g.weights
    best = {s: (0.0, (names[s],))}
    heap = [(0.0, (names[s],), s)]
    done = set()
    while heap:
        d, path, u = heapq.heappop(heap)
        if u in done or best[u] != (d, path):
            continue  # stale entry
        if u == t:
            return PathResult(path, float(d))
        done.add(u)
        for v in range(g.n):
            if v == u or v in done or not math.isfinite(w[u, v]):
                continue
            key = (d + w[u, v], path + (names[v],))
            if v not in best or key < best[v]:
                best[v] = key
                heapq.heappush(heap, (*key, v))
    raise errors.NoPath(f"no path from {source} to {target}")


def shortest_path_tree(g: AssetGraph, source) -> dict:
    """All targets from one source; ``{ticker: PathResult}`` for reachable nodes."""
    out = {}
    for t in g.tickers:
        try:
            out[t] = dijkstra(g, source, t)
        except errors.NoPath:
            pass
    return out


def all_pairs_costs(g: AssetGraph):
    """Matrix of minimum path costs plus the path table keyed by ``(source, target)``.

    The matrix is mirrored from the ``i < j`` searches so it is exactly
    symmetric; reversed-direction paths are still searched separately for the
    table because tie-breaking depends on direction.
    """
    n = g.n
    cmin = np.zeros((n, n))
    table = {}
    for i, a in enumerate(g.tickers):
        for j, b in enumerate(g.tickers):
            if i == j:
                table[(a, b)] = PathResult((a,), 0.0)
                continue
            try:
                res = dijkstra(g, a, b)
            except errors.NoPath:
                cmin[i, j] = math.inf
                continue
            table[(a, b)] = res
            if i < j:
                cmin[i, j] = cmin[j, i] = res.total_cost
    return cmin, table


def brute_force_shortest(g: AssetGraph, source, target) -> PathResult:
    """Exhaustive search over every simple path; verification oracle only."""
    if g.n > BRUTE_FORCE_MAX_NODES:
        raise errors.GraphTooLarge(f"{g.n} nodes > {BRUTE_FORCE_MAX_NODES}")
    s, t = g.index(source), g.index(target)
    if s == t:
        return PathResult((g.tickers[s],), 0.0)
    others = [k for k in range(g.n) if k not in (s, t)]
    best = None
    for r in range(len(others) + 1):
        for mid in itertools.permutations(others, r):
            idx = (s, *mid, t)
            cost = 0.0
            for a, b in zip(idx, idx[1:]):
                cost = cost + g.weights[a, b]
            if not math.isfinite(cost):
                continue
            key = (float(cost), tuple(g.tickers[k] for k in idx))
            if best is None or key < best:
                best = key
    if best is None:
        raise errors.NoPath(f"no path from {source} to {target}")
    return PathResult(best[1], best[0])
