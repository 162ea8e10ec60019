"""Run configuration: flat ``key = value`` files with command-line overrides."""
from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from . import errors
from .costgraph import COST_MODES
from .gnn import TrainConfig
from .synthetic import FIXTURE_TICKERS


@dataclass(frozen=True)
class RunConfig:
    prices: str = ""
    tickers: tuple = FIXTURE_TICKERS
    cost_mode: str = "level-diff"
    window: int = 20
    horizon: int = 5
    train_frac: float = 0.7
    val_frac: float = 0.15
    out: str = "out"
    seed: int = 0
    # training
    learning_rate: float = 1e-3
    max_epochs: int = 100
    patience: int = 10
    hidden_dim: int = 16
    num_layers: int = 2
    aggregation: str = "sum"
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 32
    minibatch_threshold: int = 1024
    # gradcheck
    trials: int = 100

    def __post_init__(self):
        if self.cost_mode not in COST_MODES:
            raise errors.InputError(f"cost_mode must be one of {COST_MODES}, got {self.cost_mode!r}")
        if self.window < 1 or self.horizon < 1:
            raise errors.InputError("window and horizon must be >= 1")
        if not (self.train_frac > 0 and self.val_frac > 0 and self.train_frac + self.val_frac < 1):
            raise errors.InputError("need train_frac, val_frac > 0 with train_frac + val_frac < 1")
        if len(self.tickers) < 2:
            raise errors.InputError("need at least 2 tickers")

    def train_config(self) -> TrainConfig:
        names = {f.name for f in fields(TrainConfig)}
        try:
            return TrainConfig(**{k: getattr(self, k) for k in names})
        except ValueError as exc:
            raise errors.InputError(str(exc)) from exc

    @property
    def out_dir(self) -> Path:
        return Path(self.out)


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    default = getattr(RunConfig, key)
    raw = raw.strip()
    try:
        if isinstance(default, tuple):
            return tuple(t.strip() for t in raw.split(",") if t.strip())
        if isinstance(default, bool):
            return raw.lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise errors.InputError(f"bad value for {key}: {raw!r}") from None
    return raw


def normalize_key(key: str) -> str:
    key = key.strip().lstrip("-").replace("-", "_")
    if key not in _FIELDS:
        raise errors.InputError(f"unknown config key {key!r}")
    return key


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        sep = "=" if "=" in line else ":" if ":" in line else None
        if sep is None:
            raise errors.InputError(f"config line {lineno}: expected key = value")
        key, raw = line.split(sep, 1)
        key = normalize_key(key)
        values[key] = _coerce(key, raw)
    return values


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Defaults, then the file at ``path`` (if any), then ``overrides`` (raw strings or values)."""
    values = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise errors.InputError(f"no such config file: {path}")
        values.update(parse_config_text(path.read_text(encoding="utf-8")))
        # relative data paths resolve against the config file's directory
        if values.get("prices") and not Path(values["prices"]).is_absolute():
            values["prices"] = str((path.parent / values["prices"]).resolve())
    for key, raw in (overrides or {}).items():
        key = normalize_key(key)
        values[key] = _coerce(key, raw) if isinstance(raw, str) else raw
    return replace(RunConfig(), **values)


def format_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        lines.append(f"{f.name} = {','.join(v) if isinstance(v, tuple) else v}")
    return "\n".join(lines) + "\n"
