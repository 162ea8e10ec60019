import datetime as dt
import math

import numpy as np
import pydot
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rebalgnn import errors
from rebalgnn.costgraph import (
    AssetGraph,
    build_adjacency,
    read_edge_list,
    to_dot,
    validate_graph,
    write_edge_list,
)
from rebalgnn.marketdata import PricePanel
from rebalgnn.pathfinder import PathResult
from rebalgnn.synthetic import business_days


def panel(closes, tickers=None):
    closes = np.asarray(closes, dtype=float)
    tickers = tickers or [f"T{i}" for i in range(closes.shape[1])]
    return PricePanel(business_days(dt.date(2020, 1, 1), closes.shape[0]), tickers, closes)


def brute_level_diff(closes):
    T, n = closes.shape
    out = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            if i != j:
                out[i][j] = math.fsum(abs(closes[t][i] - closes[t][j]) for t in range(T)) / T
    return np.array(out)


def brute_per_asset(closes):
    T, n = closes.shape
    vol = [math.fsum(abs(closes[t + 1][i] - closes[t][i]) for t in range(T - 1)) / (T - 1) for i in range(n)]
    return np.array([[0.0 if i == j else 0.5 * (vol[i] + vol[j]) for j in range(n)] for i in range(n)])


def test_identical_columns_zero_cost():
    g = build_adjacency(panel([[5, 5], [6, 6], [7, 7]]))
    assert g.weights[0, 1] == 0.0


def test_level_diff_hand_example():
    g = build_adjacency(panel([[10, 11], [12, 15]]))
    assert g.weights[0, 1] == 2.0 == g.weights[1, 0]


def test_five_tickers_ten_edges():
    rng = np.random.default_rng(0)
    g = build_adjacency(panel(rng.uniform(50, 150, (20, 5)), ["AAPL", "MSFT", "GOOGL", "AMZN", "TSLA"]))
    assert g.n == 5
    assert len(list(g.edges())) == 10
    assert validate_graph(g).ok


def test_build_errors():
    with pytest.raises(errors.TooFewAssets):
        build_adjacency(panel([[1.0], [2.0]]))
    with pytest.raises(errors.TooFewRows):
        build_adjacency(panel([[1.0, 2.0]]), "per-asset-change")


@pytest.mark.parametrize("mode, oracle", [("level-diff", brute_level_diff), ("per-asset-change", brute_per_asset)])
@pytest.mark.parametrize("shape", [(2, 2), (50, 4), (1000, 10)])
def test_matches_brute_force(mode, oracle, shape):
    closes = np.random.default_rng(shape[0]).uniform(1, 100, shape)
    g = build_adjacency(panel(closes), mode)
    assert np.max(np.abs(g.weights - oracle(closes))) <= 1e-12
    assert validate_graph(g).ok


@settings(max_examples=50)
@given(st.integers(0, 10_000), st.integers(2, 6), st.integers(2, 30), st.floats(0.01, 100))
def test_permutation_and_scale(seed, n, T, c):
    rng = np.random.default_rng(seed)
    closes = rng.uniform(1, 100, (T, n))
    perm = rng.permutation(n)
    for mode in ("level-diff", "per-asset-change"):
        g = build_adjacency(panel(closes), mode)
        gp = build_adjacency(panel(closes[:, perm]), mode)
        np.testing.assert_allclose(gp.weights, g.weights[np.ix_(perm, perm)], rtol=1e-12, atol=1e-12)
        gs = build_adjacency(panel(closes * c), mode)
        np.testing.assert_allclose(gs.weights, c * g.weights, rtol=1e-12, atol=1e-12)


def test_level_diff_translation_sensitive():
    # shifting only one column changes level differences
    closes = np.array([[10.0, 20.0], [11.0, 19.0]])
    a = build_adjacency(panel(closes)).weights[0, 1]
    b = build_adjacency(panel(closes + [5.0, 0.0])).weights[0, 1]
    assert a != b


# -- validate_graph --------------------------------------------------------------

def test_validate_valid():
    assert validate_graph(AssetGraph("AB", [[0, 1], [1, 0]])).violations == []


def test_validate_asymmetry_delta():
    rep = validate_graph(AssetGraph("AB", [[0, 1], [2, 0]]))
    (v,) = rep.violations
    assert v.kind == "asymmetry" and v.delta == 1.0


def test_validate_diagonal_negative_nonfinite():
    w = np.zeros((3, 3))
    w[2, 2] = 0.5
    assert validate_graph(AssetGraph("ABC", w)).kinds() == {"diagonal"}
    w = np.array([[0, -1, math.inf], [-1, 0, 1], [math.inf, 1, 0]])
    assert validate_graph(AssetGraph("ABC", w)).kinds() == {"negative", "non-finite"}


# -- DOT -------------------------------------------------------------------------

def _random_graph(n, seed=0):
    rng = np.random.default_rng(seed)
    w = rng.uniform(0, 10, (n, n))
    w = np.triu(w, 1)
    return AssetGraph([f"N{i}" for i in range(n)], w + w.T)


def test_dot_label():
    assert 'label="1.5000"' in to_dot(AssetGraph("AB", [[0, 1.5], [1.5, 0]]))


@pytest.mark.parametrize("n", [2, 3, 5, 7])
def test_dot_parses_with_all_edges(n):
    text = to_dot(_random_graph(n))
    (parsed,) = pydot.graph_from_dot_data(text)
    assert parsed.get_type() == "graph"
    assert len(parsed.get_edges()) == n * (n - 1) // 2


def test_dot_highlights_path():
    g = _random_graph(3)
    text = to_dot(g, PathResult(("N0", "N2", "N1"), 0.0))
    (parsed,) = pydot.graph_from_dot_data(text)
    red = [e for e in parsed.get_edges() if e.get("color") == '"red"']
    assert sorted(tuple(sorted((e.get_source().strip('"'), e.get_destination().strip('"')))) for e in red) == [
        ("N0", "N2"),
        ("N1", "N2"),
    ]
    with pytest.raises(errors.UnknownPathNode):
        to_dot(g, ["N0", "ZZ"])


# -- edge list I/O ---------------------------------------------------------------

@given(st.integers(0, 10_000), st.integers(2, 7))
def test_edge_list_round_trip(tmp_path_factory, seed, n):
    g = _random_graph(n, seed)
    path = tmp_path_factory.mktemp("el") / "g.csv"
    write_edge_list(g, path)
    back = read_edge_list(path)
    assert back == g
    np.testing.assert_array_equal(back.reorder(g.tickers).weights, g.weights)


def test_edge_list_canonical(tmp_path):
    g = AssetGraph(["TSLA", "AAPL"], [[0, 2.5], [2.5, 0]])
    write_edge_list(g, tmp_path / "g.csv")
    assert (tmp_path / "g.csv").read_text() == "from,to,cost\nAAPL,TSLA,2.5\n"


@pytest.mark.parametrize(
    "body, exc",
    [
        ("A,B,1\nB,A,2\n", errors.AsymmetricInput),
        ("A,A,1\n", errors.DuplicateEdge),
        ("A,B,1\nA,B,1\n", errors.DuplicateEdge),
        ("A,B,1\nB,C,1\n", errors.MissingEdge),
    ],
)
def test_edge_list_errors(tmp_path, body, exc):
    p = tmp_path / "g.csv"
    p.write_text("from,to,cost\n" + body)
    with pytest.raises(exc):
        read_edge_list(p)


def test_edge_list_unknown_ticker(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("from,to,cost\nA,B,1\nA,Z,2\nB,Z,3\n")
    with pytest.raises(errors.UnknownTicker):
        read_edge_list(p, tickers=["A", "B", "C"])


def test_edge_list_incomplete_allowed(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("from,to,cost\nA,B,1\nB,C,1\n")
    g = read_edge_list(p, require_complete=False)
    assert math.isinf(g.weight("A", "C"))


def test_write_rejects_invalid(tmp_path):
    with pytest.raises(errors.InvalidGraph):
        write_edge_list(AssetGraph("AB", [[0, 1], [2, 0]]), tmp_path / "g.csv")
