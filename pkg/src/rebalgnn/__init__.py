"""GNN transaction-cost prediction and Dijkstra rebalancing paths."""

__version__ = "0.1.0"
