"""How much routing saves as one edge is inflated above its cheapest detour.

For each factor k the chosen edge is set to k times the best two-hop cost;
the reported reduction is the mean over random graphs.
"""
import argparse

import numpy as np

from rebalgnn.costgraph import AssetGraph
from rebalgnn.evaluation import cost_reduction

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--graphs", type=int, default=200)
    ap.add_argument("--nodes", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'factor':>7} {'mean %':>8} {'min %':>8} {'mean steps':>11}")
    for factor in [0.5, 1.0, 1.5, 2.0, 5.0, 10.0]:
        rng = np.random.default_rng(args.seed)
        pcts, steps = [], []
        for _ in range(args.graphs):
            n = args.nodes
            w = np.triu(rng.uniform(0.1, 10, (n, n)), 1)
            w = w + w.T
            two_hop = min(w[0, k] + w[k, 1] for k in range(2, n))
            w[0, 1] = w[1, 0] = factor * two_hop
            g = AssetGraph([f"N{k}" for k in range(n)], w)
            (r,), _ = cost_reduction(g, [("N0", "N1")])
            pcts.append(r.reduction_pct)
            steps.append(r.steps)
        print(f"{factor:>7.1f} {np.mean(pcts):>8.2f} {np.min(pcts):>8.2f} {np.mean(steps):>11.2f}")
