"""Tests for sample-similarity graph construction."""

from __future__ import annotations

import math

import numpy as np
import pandas as pd
import pytest

from app.data import OmicsMatrix
from app.errors import UndefinedSimilarityError, ZeroSampleError
from app.graph import build_graph, build_inductive_graph, cosine_similarity, write_graph_csv
from app.schemas import GraphConfig


def _matrix(values):
    values = np.asarray(values, dtype=float)
    return OmicsMatrix(
        "x",
        tuple(f"s{i}" for i in range(values.shape[0])),
        tuple(f"f{j}" for j in range(values.shape[1])),
        values,
    )


def test_cosine_values():
    x = np.array([0.3, -1.2, 4.0])
    assert math.isclose(cosine_similarity(x, x), 1.0)
    assert cosine_similarity([1, 0], [0, 1]) == 0.0
    assert math.isclose(cosine_similarity([1, 1], [1, 0]), 0.70711, abs_tol=1e-5)


def test_cosine_zero_vector():
    with pytest.raises(UndefinedSimilarityError):
        cosine_similarity([0, 0], [1, 0])


def test_identical_samples_fully_connected():
    graph = build_graph(_matrix([[1.0, 2.0], [1.0, 2.0]]), GraphConfig(threshold=0.05))
    assert graph.edges.all()


def test_orthogonal_samples_only_self_loops():
    graph = build_graph(_matrix([[1.0, 0.0], [0.0, 1.0]]), GraphConfig(threshold=0.05))
    assert np.array_equal(graph.edges, np.eye(2, dtype=bool))


def test_matches_all_pairs_oracle(rng):
    values = rng.standard_normal((5, 6))
    graph = build_graph(_matrix(values), GraphConfig(threshold=0.05))
    for i in range(5):
        for j in range(5):
            s = values[i] @ values[j] / (np.linalg.norm(values[i]) * np.linalg.norm(values[j]))
            assert graph.edges[i, j] == (i == j or s >= 0.05)


def test_graph_invariants(rng):
    graph = build_graph(_matrix(rng.standard_normal((12, 4))), GraphConfig())
    assert np.array_equal(graph.edges, graph.edges.T)
    assert graph.edges.diagonal().all()
    assert all(i in nbrs for i, nbrs in enumerate(graph.neighbors))


def test_raising_threshold_never_adds_edges(rng):
    m = _matrix(rng.standard_normal((15, 5)))
    previous = None
    for delta in np.linspace(-1.0, 1.0, 9):
        edges = build_graph(m, GraphConfig(threshold=float(delta))).edges
        if previous is not None:
            assert not (edges & ~previous).any()
        previous = edges


def test_extreme_thresholds(rng):
    m = _matrix(rng.standard_normal((6, 3)))
    assert build_graph(m, GraphConfig(threshold=-1.0)).edges.all()
    assert np.array_equal(build_graph(m, GraphConfig(threshold=1.0)).edges, np.eye(6, dtype=bool))


def test_scale_invariance(rng):
    values = rng.standard_normal((8, 4))
    scaled = values * rng.uniform(0.1, 10.0, size=(8, 1))
    a = build_graph(_matrix(values), GraphConfig()).edges
    b = build_graph(_matrix(scaled), GraphConfig()).edges
    assert np.array_equal(a, b)


def test_zero_row_names_sample():
    with pytest.raises(ZeroSampleError, match="s1"):
        build_graph(_matrix([[1.0, 0.0], [0.0, 0.0]]), GraphConfig())


def test_isolated_zero_rows_keep_self_loop_only():
    values = [[1.0, 0.0], [0.0, 0.0], [0.9, 0.1]]
    # threshold -1 would otherwise connect every pair
    graph = build_graph(_matrix(values), GraphConfig(threshold=-1.0), isolate_zero_rows=True)
    assert graph.edges[1].tolist() == [False, True, False]
    assert graph.edges[:, 1].tolist() == [False, True, False]
    assert graph.edges[0].tolist() == [True, False, True]


def test_inductive_isolated_zero_rows():
    values = [[1.0, 0.0], [0.9, 0.1], [0.0, 0.0], [1.0, 0.05]]
    graph = build_inductive_graph(_matrix(values), [0, 1], GraphConfig(), isolate_zero_rows=True)
    assert graph.edges[2].tolist() == [False, False, True, False]
    assert graph.edges[3].tolist() == [True, True, False, True]


def test_inductive_graph_receiver_edges():
    values = np.array([[1.0, 0.0], [1.0, 0.1], [1.0, 0.05], [0.9, 0.0]])
    graph = build_inductive_graph(_matrix(values), [0, 1], GraphConfig())
    # test nodes 2, 3 aggregate from train nodes and themselves only
    assert graph.edges[2].tolist() == [True, True, True, False]
    assert graph.edges[3].tolist() == [True, True, False, True]
    # nothing aggregates from a test node except the node itself
    assert not graph.edges[:2, 2:].any()
    assert not graph.symmetric


def test_write_graph_csv(tmp_path):
    graph = build_graph(_matrix([[1.0, 0.0], [0.0, 1.0]]), GraphConfig())
    write_graph_csv(graph, ["a", "b"], tmp_path / "g.csv")
    frame = pd.read_csv(tmp_path / "g.csv", index_col=0)
    assert frame.values.tolist() == [[1, 0], [0, 1]]
    assert list(frame.columns) == ["a", "b"]


def test_isolated_samples_are_reported(caplog):
    with caplog.at_level("WARNING", logger="app.graph"):
        build_graph(_matrix([[1.0, 0.0], [0.0, 1.0]]), GraphConfig())
    assert "2 sample(s) have no neighbour" in caplog.text
