"""Run every CLI stage on a config and print the headline metrics.

    python3 scripts/run_fixture_pipeline.py --config configs/fixture.cfg --out out/fixture
"""
import argparse
import json
import sys
from pathlib import Path

from rebalgnn.cli import main

ROOT = Path(__file__).resolve().parents[1]

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "fixture.cfg")
    ap.add_argument("--out", type=Path, default=ROOT / "out" / "fixture")
    ap.add_argument("--from", dest="source", default="AAPL")
    ap.add_argument("--to", dest="target", default="TSLA")
    args = ap.parse_args()

    common = ["--config", str(args.config), "--out", str(args.out)]
    stages = [["ingest"], ["build-graph"], ["train"], ["predict"], ["route", "--from", args.source, "--to", args.target], ["evaluate"]]
    for stage in stages:
        print(f"$ rebalgnn {' '.join(stage)}")
        code = main(stage[:1] + common + stage[1:])
        if code:
            sys.exit(code)

    report = json.loads((args.out / "report.json").read_text())
    print()
    for key in ("mse_currency", "mse_normalized", "r2", "avg_cost_reduction_pct", "avg_path_steps"):
        print(f"{key:>26}: {report[key]}")
    for key, val in report["runtimes"].items():
        print(f"{key:>26}: {val:.4f}s")
