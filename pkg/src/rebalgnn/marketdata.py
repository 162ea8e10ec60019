"""Daily close-price ingestion and preprocessing.

Pipeline: ``parse_price_csv`` -> ``fill_missing`` -> ``compute_abs_diffs``
-> ``zscore_fit_apply`` -> ``make_feature_windows`` -> ``chronological_split``.
"""
from __future__ import annotations

import csv
import datetime as dt
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import errors
from ._io import fmt_float, write_atomic
from .costgraph import AssetGraph, COST_MODES, adjacency_from_prices

DEFAULT_EPSILON = 1e-8


@dataclass(frozen=True)
class PricePanel:
    dates: tuple
    tickers: tuple
    closes: np.ndarray  # [num_dates, num_tickers], NaN marks a missing cell

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "tickers", tuple(self.tickers))
        closes = np.asarray(self.closes, dtype=np.float64)
        if closes.ndim != 2 or closes.shape != (len(self.dates), len(self.tickers)):
            raise errors.ShapeMismatch(
                f"closes shape {closes.shape} != ({len(self.dates)}, {len(self.tickers)})"
            )
        for a, b in zip(self.dates, self.dates[1:]):
            if not a < b:
                raise errors.DuplicateDate(f"dates not strictly increasing at {b}")
        closes.setflags(write=False)
        object.__setattr__(self, "closes", closes)

    @property
    def num_dates(self) -> int:
        return len(self.dates)

    def column(self, ticker) -> np.ndarray:
        return self.closes[:, self.tickers.index(ticker)]


@dataclass(frozen=True)
class DiffPanel:
    """Absolute day-over-day changes. Row ``t`` is dated at the later of the two days."""

    dates: tuple
    tickers: tuple
    abs_diffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "tickers", tuple(self.tickers))
        arr = np.asarray(self.abs_diffs, dtype=np.float64)
        if arr.shape != (len(self.dates), len(self.tickers)):
            raise errors.ShapeMismatch(f"abs_diffs shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "abs_diffs", arr)

    @property
    def num_rows(self) -> int:
        return len(self.dates)


@dataclass(frozen=True)
class NormalizationParams:
    means: np.ndarray
    stds: np.ndarray  # already floored at epsilon
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        object.__setattr__(self, "means", np.asarray(self.means, dtype=np.float64))
        object.__setattr__(self, "stds", np.asarray(self.stds, dtype=np.float64))

    def apply(self, values: np.ndarray) -> np.ndarray:
        return (values - self.means) / self.stds

    def invert(self, values: np.ndarray) -> np.ndarray:
        return values * self.stds + self.means

    def to_dict(self) -> dict:
        return {
            "means": [float(x) for x in self.means],
            "stds": [float(x) for x in self.stds],
            "epsilon": float(self.epsilon),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationParams":
        return cls(np.array(d["means"], dtype=float), np.array(d["stds"], dtype=float), float(d["epsilon"]))


@dataclass(frozen=True)
class FeatureWindow:
    as_of_index: int
    features: np.ndarray  # [num_tickers, W]
    tickers: tuple = ()
    date: str = ""

    @property
    def window_len(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class Sample:
    window: FeatureWindow
    target: AssetGraph


# -- parsing ------------------------------------------------------------------

_MISSING = {"", "nan", "NaN", "NAN", "null", "None"}


def _parse_date(value: str, row: int) -> dt.date:
    try:
        return dt.date.fromisoformat(value.strip()[:10])
    except ValueError:
        raise errors.UnparseableDate(row, value) from None


def _parse_price(value: str) -> float:
    value = value.strip()
    if value in _MISSING:
        return math.nan
    try:
        x = float(value)
    except ValueError:
        return math.nan
    return x if math.isfinite(x) and x > 0 else math.nan


def parse_price_csv(path, tickers: Sequence[str]) -> PricePanel:
    """Read a wide (``date,AAPL,MSFT,...``) or long (``date,ticker,close``) CSV.

    Unparseable or non-positive prices become NaN and are left for
    :func:`fill_missing`.
    """
    path = Path(path)
    if not path.exists():
        raise errors.InputError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8-sig") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if len(rows) < 2:
        raise errors.EmptyFile(f"{path} has no data rows")

    header = [h.strip() for h in rows[0]]
    lower = [h.lower() for h in header]
    if "date" not in lower:
        raise errors.MissingColumn("date")
    date_col = lower.index("date")

    by_date: dict[dt.date, dict[str, float]] = {}
    if "ticker" in lower and "close" in lower and not any(t in header for t in tickers):
        t_col, c_col = lower.index("ticker"), lower.index("close")
        present = set()
        for k, r in enumerate(rows[1:], start=2):
            d = _parse_date(r[date_col], k)
            sym = r[t_col].strip()
            present.add(sym)
            by_date.setdefault(d, {})[sym] = _parse_price(r[c_col]) if c_col < len(r) else math.nan
        for t in tickers:
            if t not in present:
                raise errors.MissingColumn(t)
    else:
        for t in tickers:
            if t not in header:
                raise errors.MissingColumn(t)
        cols = {t: header.index(t) for t in tickers}
        for k, r in enumerate(rows[1:], start=2):
            d = _parse_date(r[date_col], k)
            if d in by_date:
                raise errors.DuplicateDate(f"row {k}: duplicate date {d}")
            by_date[d] = {t: _parse_price(r[c]) if c < len(r) else math.nan for t, c in cols.items()}

    dates = sorted(by_date)
    closes = np.array(
        [[by_date[d].get(t, math.nan) for t in tickers] for d in dates], dtype=np.float64
    ).reshape(len(dates), len(tickers))
    return PricePanel(tuple(d.isoformat() for d in dates), tuple(tickers), closes)


def write_panel_csv(panel: PricePanel, path) -> Path:
    lines = [",".join(["date", *panel.tickers])]
    for d, row in zip(panel.dates, panel.closes):
        lines.append(",".join([d, *("NaN" if math.isnan(x) else fmt_float(x) for x in row)]))
    return write_atomic(path, "\n".join(lines) + "\n")


# -- preprocessing ------------------------------------------------------------

def fill_missing(panel: PricePanel) -> PricePanel:
    """Linear interpolation over interior gaps, nearest-value extension at the edges."""
    closes = np.array(panel.closes, dtype=np.float64)
    idx = np.arange(panel.num_dates)
    for j, t in enumerate(panel.tickers):
        col = closes[:, j]
        ok = np.isfinite(col)
        if not ok.any():
            raise errors.AllMissingColumn(t)
        if not ok.all():
            # np.interp clamps to the end values outside the observed range
            closes[:, j] = np.where(ok, col, np.interp(idx, idx[ok], col[ok]))
    return PricePanel(panel.dates, panel.tickers, closes)


def compute_abs_diffs(panel: PricePanel) -> DiffPanel:
    if panel.num_dates < 2:
        raise errors.TooFewRows(f"need at least 2 rows, got {panel.num_dates}")
    if not np.isfinite(panel.closes).all():
        raise errors.InputError("panel has gaps; run fill_missing first")
    return DiffPanel(panel.dates[1:], panel.tickers, np.abs(np.diff(panel.closes, axis=0)))


def zscore_fit_apply(diffs: DiffPanel, fit_range=None, epsilon: float = DEFAULT_EPSILON):
    """Fit per-column mean and population std on ``fit_range`` rows, apply to all rows.

    ``fit_range`` is a ``(start, stop)`` half-open row interval or a ``range``;
    ``None`` fits on every row.
    """
    if fit_range is None:
        start, stop = 0, diffs.num_rows
    elif isinstance(fit_range, range):
        start, stop = fit_range.start, fit_range.stop
    else:
        start, stop = fit_range
    if not 0 <= start < stop <= diffs.num_rows:
        raise errors.EmptyFitRange(f"fit range [{start}, {stop}) within {diffs.num_rows} rows")
    block = diffs.abs_diffs[start:stop]
    params = NormalizationParams(block.mean(axis=0), np.maximum(block.std(axis=0), epsilon), epsilon)
    return DiffPanel(diffs.dates, diffs.tickers, params.apply(diffs.abs_diffs)), params


def num_windows(num_rows: int, window: int, horizon: int) -> int:
    return num_rows - window - horizon + 1


def make_feature_windows(
    diffs: DiffPanel,
    panel: PricePanel,
    window: int = 20,
    horizon: int = 5,
    mode: str = "level-diff",
) -> list[Sample]:
    """Pair each trailing ``window`` of normalized diffs with the forward cost graph.

    For as-of diff row ``a`` (the change from price row ``a`` to ``a+1``) the
    features are diff rows ``a-window+1 .. a`` and the target is the adjacency
    over the next ``horizon`` price rows ``a+2 .. a+1+horizon``. In
    ``per-asset-change`` mode the target uses the ``horizon`` diffs ending at
    price row ``a+1+horizon``.
    """
    if window < 1 or horizon < 1:
        raise errors.InsufficientHistory("window and horizon must be >= 1")
    if mode not in COST_MODES:
        raise ValueError(f"unknown cost mode {mode!r}")
    if panel.num_dates != diffs.num_rows + 1 or panel.tickers != diffs.tickers:
        raise errors.ShapeMismatch("diff panel does not derive from price panel")
    count = num_windows(diffs.num_rows, window, horizon)
    if count < 1:
        raise errors.InsufficientHistory(
            f"{diffs.num_rows} diff rows < window {window} + horizon {horizon}"
        )
    feats = diffs.abs_diffs
    samples = []
    for a in range(window - 1, window - 1 + count):
        if mode == "level-diff":
            future = panel.closes[a + 2 : a + 2 + horizon]
        else:
            future = panel.closes[a + 1 : a + 2 + horizon]
        win = FeatureWindow(a, np.ascontiguousarray(feats[a - window + 1 : a + 1].T), diffs.tickers, diffs.dates[a])
        target = AssetGraph(diffs.tickers, adjacency_from_prices(future, mode))
        samples.append(Sample(win, target))
    return samples


def _floor(x: float) -> int:
    # absorbs representation error such as 10 * 0.7 == 7.000000000000001
    return math.floor(x + 1e-9)


def split_sizes(n: int, train_frac: float = 0.7, val_frac: float = 0.15) -> tuple[int, int, int]:
    """Slice sizes from floored cumulative boundaries; the remainder goes to test."""
    if not (train_frac > 0 and val_frac > 0 and train_frac + val_frac < 1):
        raise ValueError("need positive fractions with train_frac + val_frac < 1")
    train_end = _floor(n * train_frac)
    val_end = _floor(n * (train_frac + val_frac))
    sizes = (train_end, val_end - train_end, n - val_end)
    if min(sizes) < 1:
        raise errors.TooFewSamples(f"{n} samples cannot fill a {train_frac}/{val_frac} split")
    return sizes


def chronological_split(samples: Sequence, train_frac: float = 0.7, val_frac: float = 0.15):
    """Contiguous train/val/test slices in time order, never shuffled."""
    samples = list(samples)
    n_train, n_val, _ = split_sizes(len(samples), train_frac, val_frac)
    return samples[:n_train], samples[n_train : n_train + n_val], samples[n_train + n_val :]


def train_fit_range(num_rows: int, window: int, horizon: int, train_frac: float, val_frac: float):
    """Diff rows visible to the training samples' feature windows."""
    n = num_windows(num_rows, window, horizon)
    if n < 1:
        raise errors.InsufficientHistory(f"{num_rows} diff rows < window {window} + horizon {horizon}")
    n_train, _, _ = split_sizes(n, train_frac, val_frac)
    return 0, window - 1 + n_train
