"""
Per-omics sample-similarity graphs.

``E_ij = 1`` iff the cosine similarity of samples *i* and *j* is at least
the threshold delta.  The diagonal is always 1, so every node has itself as a
neighbour.

In the inductive regime the graph is built over training samples only
and every test node is attached as a receiver: it aggregates from the
training nodes it is similar to (plus itself) but nothing aggregates from it.

An all-zero sample has no defined similarity.  Graphs over clean data reject
it; graphs over corrupted evaluation data (``isolate_zero_rows=True``) keep
it with its self-loop only.

Public API
----------
cosine_similarity(x, y) -> float
build_graph(matrix, config, isolate_zero_rows) -> SampleGraph
build_inductive_graph(matrix, train_indices, config, isolate_zero_rows) -> SampleGraph
write_graph_csv(graph, path)
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray
from sklearn.metrics.pairwise import cosine_similarity as _pairwise_cosine

from app.data import OmicsMatrix
from app.errors import UndefinedSimilarityError, ZeroSampleError
from app.schemas import GraphConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SampleGraph:
    """Binary edge matrix over samples; row *i* lists the nodes *i* aggregates from."""

    edges: NDArray[np.bool_]
    symmetric: bool = True

    @property
    def n(self) -> int:
        return self.edges.shape[0]

    @cached_property
    def neighbors(self) -> list[NDArray[np.intp]]:
        return [np.flatnonzero(row) for row in self.edges]

    @property
    def n_edges(self) -> int:
        return int(self.edges.sum())


# ---------------------------------------------------------------------------
# Similarity
# ---------------------------------------------------------------------------
def cosine_similarity(x: ArrayLike, y: ArrayLike) -> float:
    """``dot(x, y) / (|x| |y|)`` for two nonzero vectors."""
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    y = np.asarray(y, dtype=np.float64).reshape(1, -1)
    if not x.any() or not y.any():
        raise UndefinedSimilarityError("cosine similarity of a zero vector is undefined.")
    return float(np.clip(_pairwise_cosine(x, y)[0, 0], -1.0, 1.0))


def _similarity_matrix(matrix: OmicsMatrix, isolate_zero_rows: bool = False) -> NDArray[np.float64]:
    """All-pairs cosine similarity; zero rows either raise or never pass a threshold."""
    zero_rows = np.flatnonzero(~matrix.values.any(axis=1))
    if zero_rows.size and not isolate_zero_rows:
        raise ZeroSampleError(matrix.sample_ids[int(zero_rows[0])])
    sim = _pairwise_cosine(matrix.values)
    # BLAS may leave the product a few ulps away from symmetric
    sim = np.clip(0.5 * (sim + sim.T), -1.0, 1.0)
    if zero_rows.size:
        logger.debug("Graph %s: %d all-zero sample(s) keep only a self-loop", matrix.name, zero_rows.size)
        sim[zero_rows, :] = -np.inf
        sim[:, zero_rows] = -np.inf
    np.fill_diagonal(sim, 1.0)
    return sim


# ---------------------------------------------------------------------------
# Graph construction
# ---------------------------------------------------------------------------
def build_graph(
    matrix: OmicsMatrix,
    config: GraphConfig,
    isolate_zero_rows: bool = False,
) -> SampleGraph:
    """Threshold all-pairs cosine similarity at ``config.threshold``."""
    edges = _similarity_matrix(matrix, isolate_zero_rows) >= config.threshold
    np.fill_diagonal(edges, True)
    graph = SampleGraph(edges=edges)
    isolated = int((edges.sum(axis=1) == 1).sum())
    if isolated:
        # evaluation graphs are rebuilt per perturbation; only clean builds warn
        logger.log(
            logging.DEBUG if isolate_zero_rows else logging.WARNING,
            "Graph %s: %d sample(s) have no neighbour at delta=%.3f",
            matrix.name,
            isolated,
            config.threshold,
        )
    logger.debug(
        "Graph %s: %d nodes, %.1f mean degree (delta=%.3f)",
        matrix.name,
        graph.n,
        graph.n_edges / graph.n,
        config.threshold,
    )
    return graph


def build_inductive_graph(
    matrix: OmicsMatrix,
    train_indices: ArrayLike,
    config: GraphConfig,
    isolate_zero_rows: bool = False,
) -> SampleGraph:
    """Train-only graph with test nodes attached as receivers."""
    train = np.zeros(matrix.n, dtype=bool)
    train[np.asarray(train_indices, dtype=np.intp)] = True
    edges = _similarity_matrix(matrix, isolate_zero_rows) >= config.threshold
    # nothing aggregates from a test node; test nodes aggregate only from train
    edges[:, ~train] = False
    np.fill_diagonal(edges, True)
    return SampleGraph(edges=edges, symmetric=False)


def write_graph_csv(graph: SampleGraph, sample_ids: list[str], path: str | Path) -> None:
    """Dump the 0/1 edge matrix with sample ids as header and index."""
    pd.DataFrame(
        graph.edges.astype(int), index=sample_ids, columns=sample_ids
    ).to_csv(path, index_label="sample_id")
