import json
import subprocess
import sys

import pytest

from rebalgnn import errors
from rebalgnn.cli import main
from rebalgnn.config import RunConfig, format_config, load_config, parse_config_text

from conftest import FIXTURE_CSV

PIPELINE = ["ingest", "build-graph", "train", "predict", "evaluate"]


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    for cmd in PIPELINE:
        assert run(cmd, "--prices", FIXTURE_CSV, "--out", out) == 0
    assert run("route", "--prices", FIXTURE_CSV, "--out", out, "--from", "AAPL", "--to", "TSLA") == 0
    return out


def test_ingest_fixture(tmp_path, capsys):
    assert run("ingest", "--prices", FIXTURE_CSV, "--out", tmp_path) == 0
    assert "300 rows x 5 tickers" in capsys.readouterr().out
    norm = json.loads((tmp_path / "norm.json").read_text())
    assert len(norm["means"]) == 5


def test_missing_price_file(tmp_path, capsys):
    missing = tmp_path / "nope.csv"
    assert run("ingest", "--prices", missing, "--out", tmp_path) == 2
    assert str(missing) in capsys.readouterr().err


def test_no_price_file_configured(tmp_path):
    assert run("ingest", "--out", tmp_path) == 2


def test_missing_ticker(tmp_path, capsys):
    assert run("ingest", "--prices", FIXTURE_CSV, "--out", tmp_path, "--tickers", "AAPL,NVDA") == 2
    assert "NVDA" in capsys.readouterr().err


def test_unknown_option(tmp_path):
    assert run("ingest", "--prices", FIXTURE_CSV, "--out", tmp_path, "--bogus", "1") == 2


def test_pipeline_artifacts(pipeline):
    for name in ["panel.csv", "graph.csv", "graph.dot", "model.json", "predicted.csv", "path.json", "report.json", "series.csv"]:
        assert (pipeline / name).stat().st_size > 0
    path = json.loads((pipeline / "path.json").read_text())
    assert path["path"][0] == "AAPL" and path["path"][-1] == "TSLA" and path["steps"] == len(path["path"]) - 1
    report = json.loads((pipeline / "report.json").read_text())
    assert report["num_test_samples"] == 42
    assert len((pipeline / "series.csv").read_text().splitlines()) == 1 + 42 * 10


def test_route_unknown_ticker(pipeline, capsys):
    assert run("route", "--out", pipeline, "--from", "AAPL", "--to", "NVDA") == 3
    assert "NVDA" in capsys.readouterr().err


def test_evaluate_without_model(tmp_path):
    assert run("ingest", "--prices", FIXTURE_CSV, "--out", tmp_path) == 0
    assert run("evaluate", "--prices", FIXTURE_CSV, "--out", tmp_path) == 2


def test_gradcheck_exit_codes(tmp_path, capsys):
    assert run("gradcheck", "--trials", 5) == 0
    assert capsys.readouterr().out.startswith("PASS")
    assert run("gradcheck", "--trials", 2, "--inject-bug") == 4
    assert "worst offender" in capsys.readouterr().out
    assert run("gradcheck", "--trials", 0) == 2


def test_config_file_and_overrides(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text("# comment\nprices = data/p.csv\nwindow: 10\ntickers = A, B\nhidden-dim = 4\n")
    cfg = load_config(cfg_path, {"window": "12", "seed": 3})
    assert cfg.window == 12 and cfg.seed == 3 and cfg.hidden_dim == 4
    assert cfg.tickers == ("A", "B")
    assert cfg.prices == str((tmp_path / "data" / "p.csv").resolve())
    assert load_config(None, parse_config_text(format_config(cfg))) == cfg


def test_config_errors(tmp_path):
    with pytest.raises(errors.InputError):
        parse_config_text("nonsense line")
    with pytest.raises(errors.InputError):
        parse_config_text("unknown_key = 1")
    with pytest.raises(errors.InputError):
        parse_config_text("window = ten")
    with pytest.raises(errors.InputError):
        load_config(tmp_path / "missing.cfg")
    with pytest.raises(errors.InputError):
        RunConfig(train_frac=0.9, val_frac=0.2)


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "rebalgnn", "ingest", "--prices", str(FIXTURE_CSV), "--out", str(tmp_path)],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "panel.csv").exists()
