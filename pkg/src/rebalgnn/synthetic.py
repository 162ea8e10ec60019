"""Seeded synthetic data: a price fixture and a linear edge-cost regression set."""
from __future__ import annotations

import datetime as dt
import math

import numpy as np

from .costgraph import AssetGraph
from .marketdata import FeatureWindow, PricePanel, Sample

FIXTURE_TICKERS = ("AAPL", "MSFT", "GOOGL", "AMZN", "TSLA")
FIXTURE_START_PRICES = (130.0, 240.0, 90.0, 85.0, 110.0)
FIXTURE_VOLS = (0.016, 0.015, 0.019, 0.021, 0.035)


def business_days(start: dt.date, count: int) -> list[str]:
    out, d = [], start
    while len(out) < count:
        if d.weekday() < 5:
            out.append(d.isoformat())
        d += dt.timedelta(days=1)
    return out


def price_panel(
    days: int = 300,
    tickers=FIXTURE_TICKERS,
    start_prices=FIXTURE_START_PRICES,
    vols=FIXTURE_VOLS,
    seed: int = 7,
    missing: int = 6,
    start: dt.date = dt.date(2023, 1, 3),
) -> PricePanel:
    """Correlated geometric random walks with a few blanked cells."""
    rng = np.random.default_rng(seed)
    n = len(tickers)
    market = rng.normal(0.0003, 0.011, size=days - 1)
    idio = rng.normal(0.0, 1.0, size=(days - 1, n)) * np.asarray(vols)
    log_ret = 0.5 * market[:, None] + idio
    closes = np.asarray(start_prices) * np.exp(np.vstack([np.zeros(n), np.cumsum(log_ret, axis=0)]))
    closes = np.round(closes, 2)
    for _ in range(missing):
        closes[rng.integers(1, days - 1), rng.integers(0, n)] = math.nan
    return PricePanel(business_days(start, days), tuple(tickers), closes)


def linear_edge_samples(
    num_samples: int = 3000,
    num_nodes: int = 5,
    window: int = 20,
    noise_frac: float = 0.05,
    base_sds: float = 8.0,
    seed: int = 11,
):
    """Samples whose true cost is ``base + a . (x_i + x_j)`` plus Gaussian noise.

    Features are i.i.d. standard normal (already z-scored). ``base`` sits
    ``base_sds`` signal standard deviations above zero so costs stay positive.
    The noise standard deviation is ``noise_frac`` times the signal's.
    Returns ``(samples, noise_std)``.
    """
    rng = np.random.default_rng(seed)
    coef = rng.normal(size=window) / math.sqrt(window)
    X = rng.normal(size=(num_samples, num_nodes, window))
    proj = X @ coef  # [S, n]
    iu, ju = np.triu_indices(num_nodes, 1)
    signal = proj[:, iu] + proj[:, ju]
    sig_std = float(signal.std())
    noise_std = noise_frac * sig_std
    costs = base_sds * sig_std + signal + rng.normal(scale=noise_std, size=signal.shape)
    costs = np.maximum(costs, 0.0)
    tickers = tuple(f"N{i}" for i in range(num_nodes))
    dates = business_days(dt.date(2020, 1, 1), num_samples)
    samples = []
    for s in range(num_samples):
        w = np.zeros((num_nodes, num_nodes))
        w[iu, ju] = costs[s]
        w[ju, iu] = costs[s]
        samples.append(Sample(FeatureWindow(s, X[s], tickers, dates[s]), AssetGraph(tickers, w)))
    return samples, noise_std
