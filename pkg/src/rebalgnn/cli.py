"""Command-line pipeline: ingest -> build-graph -> train -> predict -> route -> evaluate.

Exit codes: 0 ok, 2 input/usage, 3 validation, 4 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import costgraph, errors, gnn, marketdata
from ._io import write_atomic
from .config import RunConfig, load_config
from .evaluation import (
    MetricsReport,
    cost_reduction,
    emit_report,
    path_efficiency,
    pooled_mse,
    r_squared,
    series_rows,
)
from .gradcheck import REL_TOL, run_gradcheck
from .pathfinder import all_pairs_costs, dijkstra

PANEL = "panel.csv"
DIFFS = "diffs.csv"
NORM = "norm.json"
GRAPH = "graph.csv"
GRAPH_DOT = "graph.dot"
MODEL = "model.json"
TRAIN_LOG = "train_log.csv"
PREDICTED = "predicted.csv"
PREDICTED_DOT = "predicted.dot"
PATH_JSON = "path.json"
ROUTE_DOT = "route.dot"


def _need(path: Path, producer: str) -> Path:
    if not path.exists():
        raise errors.InputError(f"missing artifact {path}; run `{producer}` first")
    return path


def _load_panel(cfg: RunConfig) -> marketdata.PricePanel:
    return marketdata.parse_price_csv(_need(cfg.out_dir / PANEL, "ingest"), cfg.tickers)


def _load_norm(cfg: RunConfig) -> marketdata.NormalizationParams:
    path = _need(cfg.out_dir / NORM, "ingest")
    return marketdata.NormalizationParams.from_dict(json.loads(path.read_text()))


def _normalized_diffs(cfg: RunConfig, panel, norm):
    diffs = marketdata.compute_abs_diffs(panel)
    return diffs, marketdata.DiffPanel(diffs.dates, diffs.tickers, norm.apply(diffs.abs_diffs))


def _splits(cfg: RunConfig):
    panel = _load_panel(cfg)
    _, normed = _normalized_diffs(cfg, panel, _load_norm(cfg))
    samples = marketdata.make_feature_windows(normed, panel, cfg.window, cfg.horizon, cfg.cost_mode)
    return marketdata.chronological_split(samples, cfg.train_frac, cfg.val_frac)


def _latest_window(cfg: RunConfig, model: gnn.GnnModel) -> marketdata.FeatureWindow:
    panel = _load_panel(cfg)
    norm = model.feature_norm or _load_norm(cfg)
    _, normed = _normalized_diffs(cfg, panel, norm)
    if normed.num_rows < cfg.window:
        raise errors.InsufficientHistory(f"{normed.num_rows} diff rows < window {cfg.window}")
    a = normed.num_rows - 1
    feats = np.ascontiguousarray(normed.abs_diffs[a - cfg.window + 1 : a + 1].T)
    return marketdata.FeatureWindow(a, feats, normed.tickers, normed.dates[a])


# -- subcommands -------------------------------------------------------------------

def cmd_ingest(cfg: RunConfig) -> int:
    if not cfg.prices:
        raise errors.InputError("no input file: set `prices` in the config or pass --prices PATH")
    raw = marketdata.parse_price_csv(cfg.prices, cfg.tickers)
    gaps = int(np.isnan(raw.closes).sum())
    panel = marketdata.fill_missing(raw)
    diffs = marketdata.compute_abs_diffs(panel)
    fit = marketdata.train_fit_range(diffs.num_rows, cfg.window, cfg.horizon, cfg.train_frac, cfg.val_frac)
    _, norm = marketdata.zscore_fit_apply(diffs, fit)
    out = cfg.out_dir
    marketdata.write_panel_csv(panel, out / PANEL)
    marketdata.write_panel_csv(
        marketdata.PricePanel(diffs.dates, diffs.tickers, diffs.abs_diffs), out / DIFFS
    )
    write_atomic(out / NORM, json.dumps({**norm.to_dict(), "fit_rows": list(fit)}, indent=2) + "\n")
    print(
        f"ingested {panel.num_dates} rows x {len(panel.tickers)} tickers "
        f"({panel.dates[0]} .. {panel.dates[-1]}), filled {gaps} gaps, "
        f"normalization fit on diff rows [{fit[0]}, {fit[1]})"
    )
    return 0


def cmd_build_graph(cfg: RunConfig) -> int:
    g = costgraph.require_valid(costgraph.build_adjacency(_load_panel(cfg), cfg.cost_mode))
    costgraph.write_edge_list(g, cfg.out_dir / GRAPH)
    costgraph.write_dot(g, cfg.out_dir / GRAPH_DOT)
    print(f"graph: {g.n} nodes, {g.n * (g.n - 1) // 2} edges ({cfg.cost_mode})")
    return 0


def cmd_train(cfg: RunConfig) -> int:
    tcfg = cfg.train_config()
    train, val, test = _splits(cfg)
    model, log = gnn.train(train, val, tcfg, feature_norm=_load_norm(cfg))
    model.config = {**model.config, "window": cfg.window, "horizon": cfg.horizon, "cost_mode": cfg.cost_mode}
    gnn.save_model(model, cfg.out_dir / MODEL)
    write_atomic(cfg.out_dir / TRAIN_LOG, log.to_csv())
    best = log.records[log.best_epoch - 1]
    print(
        f"trained on {len(train)} samples ({len(val)} val, {len(test)} test): "
        f"{len(log.records)} epochs, best epoch {log.best_epoch} "
        f"train_mse={best.train_mse:.6g} val_mse={best.val_mse:.6g}"
    )
    return 0


def cmd_predict(cfg: RunConfig) -> int:
    model = gnn.load_model(_need(cfg.out_dir / MODEL, "train"))
    win = _latest_window(cfg, model)
    g = costgraph.require_valid(gnn.predict_edge_costs(model, win))
    costgraph.write_edge_list(g, cfg.out_dir / PREDICTED)
    costgraph.write_dot(g, cfg.out_dir / PREDICTED_DOT)
    print(f"predicted costs for the {cfg.horizon} days after {win.date}:")
    for e in g.edges():
        print(f"  {e.source}-{e.target}: {e.cost:.4f}")
    return 0


def cmd_route(cfg: RunConfig, source: str, target: str) -> int:
    g = costgraph.require_valid(costgraph.read_edge_list(_need(cfg.out_dir / PREDICTED, "predict")))
    res = dijkstra(g, source, target)
    write_atomic(cfg.out_dir / PATH_JSON, res.to_json() + "\n")
    costgraph.write_dot(g, cfg.out_dir / ROUTE_DOT, res)
    print(res.to_json())
    return 0


def _read_train_log(path: Path) -> list:
    if not path.exists():
        return []
    with path.open(newline="") as fh:
        return [float(r["seconds"]) for r in csv.DictReader(fh)]


def cmd_evaluate(cfg: RunConfig) -> int:
    t_start = time.perf_counter()
    model = gnn.load_model(_need(cfg.out_dir / MODEL, "train"))
    _, _, test = _splits(cfg)
    actual = [s.target for s in test]
    predicted = [costgraph.require_valid(gnn.predict_edge_costs(model, s.window)) for s in test]

    mse_currency = pooled_mse(predicted, actual)
    iu = np.triu_indices(len(cfg.tickers), 1)
    pred_flat = np.concatenate([p.reorder(cfg.tickers).weights[iu] for p in predicted])
    act_flat = np.concatenate([a.reorder(cfg.tickers).weights[iu] for a in actual])
    try:
        r2 = r_squared(pred_flat, act_flat)
    except errors.ZeroVariance:
        r2 = float("nan")

    reductions, paths = [], []
    for g in predicted:
        per_pair, _ = cost_reduction(g)
        reductions += [r.reduction_pct for r in per_pair]
    t0 = time.perf_counter()
    for g in predicted:
        _, table = all_pairs_costs(g)
        paths += [p for (a, b), p in table.items() if a < b]
    dijkstra_seconds = (time.perf_counter() - t0) / len(predicted)
    avg_steps, histogram = path_efficiency(paths)

    epoch_seconds = _read_train_log(cfg.out_dir / TRAIN_LOG)
    names = sorted(cfg.tickers)
    metrics = MetricsReport(
        mse_normalized=mse_currency / model.target_std**2,
        mse_currency=mse_currency,
        r2=r2,
        avg_cost_reduction_pct=float(np.mean(reductions)),
        avg_path_steps=avg_steps,
        runtimes={
            "train_epoch_mean_seconds": float(np.mean(epoch_seconds)) if epoch_seconds else None,
            "dijkstra_all_pairs_seconds": dijkstra_seconds,
            "end_to_end_seconds": time.perf_counter() - t_start,
        },
        extra={
            "period": {"start": test[0].window.date, "end": test[-1].window.date},
            "pairs": [f"{a}-{b}" for i, a in enumerate(names) for b in names[i + 1 :]],
            "num_test_samples": len(test),
            "path_steps_histogram": histogram,
            "cost_mode": cfg.cost_mode,
            "horizon_days": cfg.horizon,
        },
    )
    dates = [s.window.date for s in test]
    emit_report(metrics, series_rows(dates, actual, predicted), cfg.out_dir)
    print(
        f"test samples {len(test)}: mse={mse_currency:.6g} (normalized {metrics.mse_normalized:.6g}) "
        f"r2={r2:.4f} avg_reduction={metrics.avg_cost_reduction_pct:.2f}% avg_steps={avg_steps:.3f}"
    )
    return 0


def cmd_gradcheck(cfg: RunConfig, inject_bug: bool = False) -> int:
    if cfg.trials < 1:
        raise errors.InputError("trials must be >= 1")
    t0 = time.perf_counter()
    results = run_gradcheck(cfg.trials, seed=cfg.seed, corrupt=inject_bug)
    worst = max(results, key=lambda r: r.max_rel_error)
    elapsed = time.perf_counter() - t0
    line = (
        f"gradcheck: {len(results)} trials in {elapsed:.2f}s, max relative error "
        f"{worst.max_rel_error:.3e} (tolerance {REL_TOL:.0e})"
    )
    if worst.max_rel_error >= REL_TOL:
        print(f"FAIL {line}")
        print(f"worst offender: {worst}")
        return errors.VerificationError.exit_code
    print(f"PASS {line}")
    return 0


# -- argument parsing ---------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="flat key = value config file")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS, help="artifact directory")

    p = argparse.ArgumentParser(
        prog="rebalgnn",
        parents=[common],
        description="GNN transaction-cost prediction and minimum-cost rebalancing paths.",
        epilog="Any config key can be overridden with --key value (e.g. --window 10).",
    )
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("ingest", parents=[common], help="parse, repair, difference and normalize prices")
    sub.add_parser("build-graph", parents=[common], help="historical cost graph (edge list + DOT)")
    sub.add_parser("train", parents=[common], help="train the GNN cost model")
    sub.add_parser("predict", parents=[common], help="predict the forward cost graph")
    r = sub.add_parser("route", parents=[common], help="cheapest path between two tickers")
    r.add_argument("--from", dest="source", required=True)
    r.add_argument("--to", dest="target", required=True)
    sub.add_parser("evaluate", parents=[common], help="test-set metrics, report.json and series.csv")
    g = sub.add_parser("gradcheck", parents=[common], help="finite-difference check of GNN gradients")
    g.add_argument("--inject-bug", action="store_true", help=argparse.SUPPRESS)
    return p


def _overrides(extra: list) -> dict:
    out = {}
    i = 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise errors.InputError(f"unexpected argument {tok!r}")
        if "=" in tok:
            key, value = tok[2:].split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise errors.InputError(f"missing value for {tok}")
            key, value = tok[2:], extra[i + 1]
            i += 2
        out[key] = value
    return out


def main(argv=None) -> int:
    parser = _parser()
    args, extra = parser.parse_known_args(argv)
    try:
        overrides = _overrides(extra)
        for key in ("seed", "out"):
            if key in args:
                overrides[key] = str(getattr(args, key))
        cfg = load_config(getattr(args, "config", None), overrides)
        if args.command == "ingest":
            return cmd_ingest(cfg)
        if args.command == "build-graph":
            return cmd_build_graph(cfg)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "predict":
            return cmd_predict(cfg)
        if args.command == "route":
            return cmd_route(cfg, args.source, args.target)
        if args.command == "evaluate":
            return cmd_evaluate(cfg)
        if args.command == "gradcheck":
            return cmd_gradcheck(cfg, args.inject_bug)
    except errors.RebalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    parser.error(f"unknown command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
