"""Regenerate the bundled 5-ticker, 300-day synthetic price CSV."""
import argparse
from pathlib import Path

from rebalgnn.marketdata import write_panel_csv
from rebalgnn.synthetic import price_panel

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "rebalgnn" / "data" / "fixture_prices.csv"

if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=DEFAULT_OUT)
    ap.add_argument("--days", type=int, default=300)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    panel = price_panel(days=args.days, seed=args.seed)
    write_panel_csv(panel, args.out)
    print(f"wrote {args.out} ({panel.num_dates} rows x {len(panel.tickers)} tickers)")
