"""
Graph-contrastive pretraining of one omics encoder.

Two views of the sample graph share its edges and differ only in a
column mask over node features.  Both views go through the shared GAT
encoder and a projection head; the symmetric NT-Xent objective pulls the
two embeddings of each node together and pushes the other ``2(n-1)``
embeddings away.  Only the encoder weights are kept afterwards.

Public API
----------
augment(features, p, rng) -> Tensor
project(embeddings, head) -> Tensor
nt_xent_pair(view_a, view_b, i, tau) -> float
contrastive_loss(k1, k2, tau) -> Tensor
pretrain(graph, features, encoder, head, config, epochs, lr, tau) -> PretrainedWeights
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.errors import DimensionError, NonFiniteLossError, UndefinedSimilarityError
from app.gat import GatEncoderParams, encode
from app.graph import SampleGraph
from app.params import MlpParams, mlp
from app.schemas import AugmentationConfig, CheckpointKind
from app.tensor import (
    Adam,
    GradientTape,
    Tensor,
    concat,
    gather,
    l2_normalize_rows,
    matmul,
    neg,
    row_log_softmax,
    take_rows,
    total_sum,
    transpose,
)

logger = logging.getLogger(__name__)


@dataclass
class PretrainedWeights:
    """Encoder weights after pretraining (the projection head is not transferred)."""

    omics: str
    encoder: GatEncoderParams
    head: MlpParams | None = None
    kind: CheckpointKind = CheckpointKind.PRETRAINED
    losses: list[float] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Views and projection
# ---------------------------------------------------------------------------
def augment(
    features: Tensor,
    p: float,
    rng: np.random.Generator | int,
) -> Tensor:
    """Zero each feature column independently with probability *p*."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"mask probability must lie in [0, 1], got {p}.")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    keep = (rng.random(features.shape[1]) >= p).astype(np.float64)
    return features * keep


def project(embeddings: Tensor, head: MlpParams) -> Tensor:
    """Two-layer ELU projection head."""
    if embeddings.shape[1] != head.d_in:
        raise DimensionError(
            f"projection head expects width {head.d_in}, got {embeddings.shape[1]}."
        )
    return mlp(embeddings, head)


# ---------------------------------------------------------------------------
# Contrastive objective
# ---------------------------------------------------------------------------
def _unit_rows(x: NDArray[np.float64]) -> NDArray[np.float64]:
    """Row-normalise, raising when a row has zero norm."""
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    if (norms == 0.0).any():
        raise UndefinedSimilarityError("embedding row with zero norm.")
    return x / norms


def nt_xent_pair(
    view_a: ArrayLike,
    view_b: ArrayLike,
    i: int,
    tau: float,
) -> float:
    """Loss of the positive pair ``(view_a[i], view_b[i])``.

    Negatives are ``view_a[j]`` and ``view_b[j]`` for every ``j != i``.
    """
    if tau <= 0:
        raise ValueError("tau must be positive.")
    a = _unit_rows(np.atleast_2d(np.asarray(view_a, dtype=np.float64)))
    b = _unit_rows(np.atleast_2d(np.asarray(view_b, dtype=np.float64)))
    others = np.arange(a.shape[0]) != i
    logits = np.concatenate(
        [[a[i] @ b[i]], a[others] @ a[i], b[others] @ a[i]]
    ) / tau
    top = logits.max()
    return float(-(logits[0] - top - math.log(np.exp(logits - top).sum())))


def contrastive_loss(k1: Tensor, k2: Tensor, tau: float) -> Tensor:
    """Sum over nodes of the loss in both directions."""
    if k1.shape != k2.shape:
        raise DimensionError(f"view shapes differ: {k1.shape} vs {k2.shape}.")
    if tau <= 0:
        raise ValueError("tau must be positive.")
    n = k1.shape[0]
    z = l2_normalize_rows(concat([k1, k2], axis=0))
    sim = matmul(z, transpose(z)) * (1.0 / tau)
    mask = ~np.eye(2 * n, dtype=bool)
    log_probs = row_log_softmax(sim, mask)
    rows = np.arange(2 * n)
    positives = np.concatenate([np.arange(n, 2 * n), np.arange(n)])
    return neg(total_sum(gather(log_probs, rows, positives)))


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------
def pretrain(
    graph: SampleGraph,
    features: Tensor | NDArray[np.float64],
    encoder: GatEncoderParams,
    head: MlpParams,
    config: AugmentationConfig,
    epochs: int = 2000,
    lr: float = 1e-3,
    tau: float = 0.5,
    rows: ArrayLike | None = None,
    omics: str = "omics",
    log_every: int = 100,
) -> PretrainedWeights:
    """Optimise *encoder* and *head* in place; no labels are involved.

    *rows* restricts the objective to a subset of nodes (inductive mode).
    """
    x = features if isinstance(features, Tensor) else Tensor(features)
    rng = np.random.default_rng(config.seed)
    params = encoder.parameters() + list(head.named("").values())
    optimizer = Adam(params, lr)
    losses: list[float] = []

    for epoch in range(1, epochs + 1):
        with GradientTape() as tape:
            view1 = augment(x, config.p1, rng)
            view2 = augment(x, config.p2, rng)
            k1 = project(encode(graph, view1, encoder), head)
            k2 = project(encode(graph, view2, encoder), head)
            if rows is not None:
                k1, k2 = take_rows(k1, rows), take_rows(k2, rows)
            loss = contrastive_loss(k1, k2, tau)
        value = loss.item()
        if not math.isfinite(value):
            raise NonFiniteLossError("pretrain", epoch, value)
        optimizer.step(tape.gradient(loss, params))
        losses.append(value)
        if epoch == 1 or epoch % log_every == 0 or epoch == epochs:
            logger.info("[%s] pretrain epoch %d/%d loss %.4f", omics, epoch, epochs, value)

    return PretrainedWeights(omics=omics, encoder=encoder, head=head, losses=losses)
