"""
Adaptive cross-omics distillation over a complete directed graph of omics.

For every sample i and ordered pair (source j, target k), j != k::

    e_i(k<-j) = sigmoid(W2 . [z_i^j W1^j || z_i^k W1^k])
    l_i(k<-j) = |z_i^j - z_i^k|_1          (source detached by default)
    L_CD      = sum_i sum_k sum_{j != k} e_i(k<-j) * l_i(k<-j)

The strengths keep gradients through both logit inputs, so the model
learns which omics should teach which.

Public API
----------
DistillParams
init_distill(rng, n_omics, n_classes, d_e) -> DistillParams
edge_strength(z_j, z_k, j, k, params) -> Tensor
pairwise_logit_loss(z_j, z_k, symmetric) -> Tensor
cd_loss(logits, params, symmetric) -> Tensor
mean_edge_strengths(logits, params, omics) -> list[tuple[str, str, float]]
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from app.errors import DimensionError, InvalidDatasetError
from app.params import xavier_uniform
from app.tensor import Tensor, absolute, concat, detach, matmul, row_sum, sigmoid, total_sum


@dataclass
class DistillParams:
    project: list[Tensor]  # per omics W1^m, C x d_e
    scorer: Tensor  # W2, (2 * d_e) x 1

    def __post_init__(self) -> None:
        if len({w.shape[1] for w in self.project}) > 1:
            raise DimensionError("all W1 projections must share their output width.")

    @property
    def d_e(self) -> int:
        return self.project[0].shape[1]

    def named(self, prefix: str) -> dict[str, Tensor]:
        out = {f"{prefix}.W1.{m}": w for m, w in enumerate(self.project)}
        out[f"{prefix}.W2"] = self.scorer
        return out


def init_distill(
    rng: np.random.Generator,
    n_omics: int,
    n_classes: int,
    d_e: int = 16,
) -> DistillParams:
    """Per-omics projections ``W1`` and the shared scorer ``W2``."""
    return DistillParams(
        project=[xavier_uniform(rng, n_classes, d_e) for _ in range(n_omics)],
        scorer=xavier_uniform(rng, 2 * d_e, 1),
    )


def edge_strength(
    z_j: Tensor,
    z_k: Tensor,
    j: int,
    k: int,
    params: DistillParams,
) -> Tensor:
    """Per-sample strength of distillation from omics *j* into omics *k* (n x 1)."""
    if z_j.shape != z_k.shape:
        raise DimensionError(f"logit shapes differ: {z_j.shape} vs {z_k.shape}.")
    if z_j.shape[1] != params.project[j].shape[0]:
        raise DimensionError(
            f"logit width {z_j.shape[1]} != W1 input width {params.project[j].shape[0]}."
        )
    pair = concat([matmul(z_j, params.project[j]), matmul(z_k, params.project[k])], axis=1)
    return sigmoid(matmul(pair, params.scorer))


def pairwise_logit_loss(z_j: Tensor, z_k: Tensor, symmetric: bool = False) -> Tensor:
    """Per-sample L1 distance (n x 1); the source *z_j* is detached unless *symmetric*."""
    if z_j.shape != z_k.shape:
        raise DimensionError(f"logit shapes differ: {z_j.shape} vs {z_k.shape}.")
    source = z_j if symmetric else detach(z_j)
    return row_sum(absolute(source - z_k))


def cd_loss(
    logits: Sequence[Tensor],
    params: DistillParams,
    symmetric: bool = False,
) -> Tensor:
    """Strength-weighted L1 distillation summed over ordered omics pairs and samples.

    The source logits are detached unless *symmetric*.
    """
    if len(logits) < 2:
        raise InvalidDatasetError("cross-omics distillation needs at least 2 omics.")
    terms = []
    for k, z_k in enumerate(logits):
        for j, z_j in enumerate(logits):
            if j == k:
                continue
            strength = edge_strength(z_j, z_k, j, k, params)
            terms.append(total_sum(strength * pairwise_logit_loss(z_j, z_k, symmetric)))
    total = terms[0]
    for term in terms[1:]:
        total = total + term
    return total


def mean_edge_strengths(
    logits: Sequence[Tensor],
    params: DistillParams,
    omics: Sequence[str],
) -> list[tuple[str, str, float]]:
    """``(source, target, mean strength over samples)`` for every ordered pair."""
    rows = []
    for k, z_k in enumerate(logits):
        for j, z_j in enumerate(logits):
            if j != k:
                e = edge_strength(detach(z_j), detach(z_k), j, k, params)
                rows.append((omics[j], omics[k], float(e.data.mean())))
    return rows
