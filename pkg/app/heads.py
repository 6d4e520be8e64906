"""
Classifier heads and the training objective.

* auxiliary heads: one perceptron per omics on the encoder output F^m
* omics logits: one linear map per omics on Z^m, feeding distillation
* final head: perceptron on the concatenation of every Z^m
* total objective: ``lambda1 * L_AC + lambda2 * L_CD + L_Final``

Cross-entropies are means over the training rows of each omics.

Public API
----------
HeadParams, FinalOutput
init_heads(seed, omics, d_f, d_z, n_classes, hidden, use_cd) -> HeadParams
auxiliary_loss(f_all, labels, train_indices, heads) -> Tensor
omics_logits(z_m, params) -> Tensor
final_loss(z_all, labels, train_indices, heads) -> FinalOutput
total_loss(l_ac, l_cd, l_final, weights) -> Tensor
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.errors import DimensionError, NonFiniteLossError
from app.params import LinearParams, MlpParams, component_rng, linear, mlp
from app.schemas import LossWeights
from app.tensor import Tensor, concat, cross_entropy_logits, take_rows


@dataclass
class HeadParams:
    auxiliary: list[MlpParams]
    logits: list[LinearParams]
    final: MlpParams
    fusion: list[LinearParams] = field(default_factory=list)  # replaces distillation when it is off

    def named(self, prefix: str) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for m, head in enumerate(self.auxiliary):
            out.update(head.named(f"{prefix}.aux{m}"))
        for m, layer in enumerate(self.logits):
            out.update(layer.named(f"{prefix}.logits{m}"))
        for m, layer in enumerate(self.fusion):
            out.update(layer.named(f"{prefix}.fusion{m}"))
        out.update(self.final.named(f"{prefix}.final"))
        return out


class FinalOutput(NamedTuple):
    loss: Tensor
    logits: Tensor
    predictions: NDArray[np.int64]


def init_heads(
    seed: int,
    omics: Sequence[str],
    d_f: int,
    d_z: int,
    n_classes: int,
    hidden: int = 64,
    use_cd: bool = True,
) -> HeadParams:
    """Auxiliary, per-omics logit (or fusion) and final heads."""
    multi = len(omics) > 1
    return HeadParams(
        auxiliary=[
            MlpParams.create(component_rng(seed, "aux", name), [d_f, hidden, n_classes])
            for name in omics
        ],
        logits=[
            LinearParams.create(component_rng(seed, "logits", name), d_z, n_classes)
            for name in omics
        ]
        if multi and use_cd
        else [],
        fusion=[
            LinearParams.create(component_rng(seed, "fusion", name), d_z, d_z)
            for name in omics
        ]
        if multi and not use_cd
        else [],
        final=MlpParams.create(
            component_rng(seed, "final"), [len(omics) * d_z, hidden, n_classes]
        ),
    )


def _train_rows(train_indices: ArrayLike) -> NDArray[np.intp]:
    """Training indices as an array; an empty set raises."""
    idx = np.asarray(train_indices, dtype=np.intp)
    if idx.size == 0:
        raise DimensionError("empty training set.")
    return idx


def auxiliary_loss(
    f_all: Sequence[Tensor],
    labels: ArrayLike,
    train_indices: ArrayLike,
    heads: HeadParams,
) -> Tensor:
    """Sum over omics of the per-omics cross-entropy on training rows."""
    idx = _train_rows(train_indices)
    y = np.asarray(labels)[idx]
    if len(f_all) != len(heads.auxiliary):
        raise DimensionError(f"{len(f_all)} omics but {len(heads.auxiliary)} auxiliary heads.")
    losses = [
        cross_entropy_logits(mlp(take_rows(f, idx), head), y)
        for f, head in zip(f_all, heads.auxiliary)
    ]
    total = losses[0]
    for loss in losses[1:]:
        total = total + loss
    return total


def omics_logits(z_m: Tensor, params: LinearParams) -> Tensor:
    """Linear map from ``Z^m`` to class logits."""
    if z_m.shape[1] != params.d_in:
        raise DimensionError(f"logits map expects width {params.d_in}, got {z_m.shape[1]}.")
    return linear(z_m, params)


def final_logits(z_all: Sequence[Tensor], heads: HeadParams) -> Tensor:
    """Final MLP over the concatenated fused representations."""
    fused = z_all[0] if len(z_all) == 1 else concat(list(z_all), axis=1)
    if fused.shape[1] != heads.final.d_in:
        raise DimensionError(
            f"final head expects width {heads.final.d_in}, got {fused.shape[1]}."
        )
    return mlp(fused, heads.final)


def final_loss(
    z_all: Sequence[Tensor],
    labels: ArrayLike,
    train_indices: ArrayLike,
    heads: HeadParams,
) -> FinalOutput:
    """Cross-entropy of the final head on training rows, with predictions for all rows."""
    idx = _train_rows(train_indices)
    logits = final_logits(z_all, heads)
    loss = cross_entropy_logits(take_rows(logits, idx), np.asarray(labels)[idx])
    return FinalOutput(loss, logits, logits.data.argmax(axis=1))


def total_loss(
    l_ac: Tensor,
    l_cd: Tensor | None,
    l_final: Tensor,
    weights: LossWeights,
) -> Tensor:
    """``lambda1 * l_ac + lambda2 * l_cd + l_final``; a missing ``l_cd`` drops its term."""
    for name, term in (("auxiliary", l_ac), ("distillation", l_cd), ("final", l_final)):
        if term is not None and not math.isfinite(term.item()):
            raise NonFiniteLossError(name, None, term.item())
    total = l_ac * weights.lambda1 + l_final
    if l_cd is not None:
        total = total + l_cd * weights.lambda2
    return total
