"""
Omics-specific self-attention and cross-omics attention.

Samples are the tokens: every sample of omics m attends over all samples
(or only the training samples, when ``key_rows`` is given).

Public API
----------
AttentionParams, FusedRepresentation
init_attention(rng, d_in, d_attn) -> AttentionParams
scaled_dot_attention(q, k, v) -> Tensor
self_attend(f, params) -> Tensor
cross_attend(u_all, params) -> list[Tensor]
fuse(f_all, self_params, cross_params) -> FusedRepresentation
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike

from app.errors import DimensionError
from app.params import xavier_uniform
from app.tensor import Tensor, concat, matmul, row_softmax, take_rows, transpose


@dataclass
class AttentionParams:
    """Query / key / value maps of one omics."""

    query: Tensor
    key: Tensor
    value: Tensor

    def __post_init__(self) -> None:
        widths = {self.query.shape[1], self.key.shape[1], self.value.shape[1]}
        if len(widths) != 1:
            raise DimensionError(f"Q/K/V output widths differ: {sorted(widths)}.")

    @property
    def d_in(self) -> int:
        return self.query.shape[0]

    @property
    def d_attn(self) -> int:
        return self.query.shape[1]

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.Q": self.query, f"{prefix}.K": self.key, f"{prefix}.V": self.value}


@dataclass
class FusedRepresentation:
    """Self-attended ``u`` and cross-attended ``z`` per omics."""

    u: list[Tensor]
    z: list[Tensor]


def init_attention(rng: np.random.Generator, d_in: int, d_attn: int = 64) -> AttentionParams:
    """Xavier-initialised query, key and value maps."""
    return AttentionParams(
        query=xavier_uniform(rng, d_in, d_attn),
        key=xavier_uniform(rng, d_in, d_attn),
        value=xavier_uniform(rng, d_in, d_attn),
    )


def scaled_dot_attention(q: Tensor, k: Tensor, v: Tensor) -> Tensor:
    """``row_softmax(q k^T / sqrt(d)) v``."""
    if q.shape[1] != k.shape[1]:
        raise DimensionError(f"query width {q.shape[1]} != key width {k.shape[1]}.")
    if k.shape[0] != v.shape[0]:
        raise DimensionError(f"{k.shape[0]} keys but {v.shape[0]} values.")
    scores = matmul(q, transpose(k)) * (1.0 / math.sqrt(q.shape[1]))
    return matmul(row_softmax(scores), v)


def _attend(
    queries_from: Tensor,
    keys_from: Tensor,
    q_params: AttentionParams,
    kv_params: AttentionParams,
    key_rows: ArrayLike | None,
) -> Tensor:
    """Attention of *queries_from* over *keys_from*, keys optionally restricted to *key_rows*."""
    source = keys_from if key_rows is None else take_rows(keys_from, key_rows)
    return scaled_dot_attention(
        matmul(queries_from, q_params.query),
        matmul(source, kv_params.key),
        matmul(source, kv_params.value),
    )


def self_attend(
    f: Tensor,
    params: AttentionParams,
    key_rows: ArrayLike | None = None,
) -> Tensor:
    """Sample-axis self-attention within one omics."""
    if f.shape[1] != params.d_in:
        raise DimensionError(f"self-attention expects width {params.d_in}, got {f.shape[1]}.")
    return _attend(f, f, params, params, key_rows)


def cross_attend(
    u_all: Sequence[Tensor],
    params: Sequence[AttentionParams],
    key_rows: ArrayLike | None = None,
) -> list[Tensor]:
    """For each m, concatenate attention of ``u[m]`` over every ``u[j]``, j != m, in ascending j."""
    if len({u.shape[0] for u in u_all}) != 1:
        raise DimensionError(f"row counts differ: {[u.shape[0] for u in u_all]}.")
    if len(u_all) != len(params):
        raise DimensionError("one attention parameter set is needed per omics.")
    z = []
    for m, u_m in enumerate(u_all):
        blocks = [
            _attend(u_m, u_j, params[m], params[j], key_rows)
            for j, u_j in enumerate(u_all)
            if j != m
        ]
        z.append(blocks[0] if len(blocks) == 1 else concat(blocks, axis=1))
    return z


def fuse(
    f_all: Sequence[Tensor],
    self_params: Sequence[AttentionParams],
    cross_params: Sequence[AttentionParams],
    key_rows: ArrayLike | None = None,
) -> FusedRepresentation:
    """Self-attention per omics, then cross-attention; a single omics keeps ``z = u``."""
    u = [self_attend(f_m, att, key_rows) for f_m, att in zip(f_all, self_params)]
    z = cross_attend(u, cross_params, key_rows) if len(u) > 1 else list(u)
    return FusedRepresentation(u=u, z=z)
