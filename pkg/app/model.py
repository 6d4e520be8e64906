"""
The complete multi-omics model: parameters, forward pass and objective.

Forward pass per run::

    F^m = GAT(G^m, X^m)                         encoders
    U^m = SelfAttention(F^m)                    omics-specific attention
    Z^m = ||_{j != m} CrossAttention(U^m, U^j)  (Z^m = U^m when M = 1)
    z^m = Z^m W^m                               per-omics logits (distillation on)
    Z^m = ELU(Z^m W^m + b^m)                    fully connected stand-in (distillation off)
    y   = MLP(Z^1 || ... || Z^M)                final prediction

Public API
----------
ModelParams, ForwardOutputs, LossBreakdown
build_model(dims, omics, n_classes, config, use_cd, seed, encoders) -> ModelParams
forward(model, graphs, features, key_rows) -> ForwardOutputs
compute_loss(model, outputs, labels, train_indices, config) -> LossBreakdown
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.attention import AttentionParams, fuse, init_attention
from app.distillation import DistillParams, cd_loss, init_distill
from app.errors import CheckpointError, DimensionError
from app.gat import GatEncoderParams, encode, init_encoder
from app.graph import SampleGraph
from app.heads import HeadParams, auxiliary_loss, final_loss, init_heads, omics_logits, total_loss
from app.params import component_rng, linear
from app.schemas import TrainConfig
from app.tensor import Tensor, elu, take_rows


@dataclass
class ModelParams:
    """Every learnable tensor of one model."""

    omics: list[str]
    n_classes: int
    encoders: list[GatEncoderParams]
    self_attention: list[AttentionParams]
    cross_attention: list[AttentionParams]
    heads: HeadParams
    distill: DistillParams | None = None

    @property
    def n_omics(self) -> int:
        return len(self.omics)

    def gat_named(self) -> dict[str, Tensor]:
        """Encoder parameters; optimised with the GAT learning rate."""
        out: dict[str, Tensor] = {}
        for name, enc in zip(self.omics, self.encoders):
            out.update(enc.named(f"gat.{name}"))
        return out

    def inter_named(self) -> dict[str, Tensor]:
        """Attention, distillation and head parameters; optimised with the inter-omics learning rate."""
        out: dict[str, Tensor] = {}
        for name, att in zip(self.omics, self.self_attention):
            out.update(att.named(f"self_attn.{name}"))
        for name, att in zip(self.omics, self.cross_attention):
            out.update(att.named(f"cross_attn.{name}"))
        if self.distill is not None:
            out.update(self.distill.named("distill"))
        out.update(self.heads.named("heads"))
        return out

    def named(self) -> dict[str, Tensor]:
        return {**self.gat_named(), **self.inter_named()}

    def state(self) -> dict[str, NDArray[np.float64]]:
        """Copies of every parameter array, keyed by name."""
        return {name: t.data.copy() for name, t in self.named().items()}

    def load_state(self, state: Mapping[str, NDArray[np.float64]]) -> None:
        """Copy every parameter from *state* in place; missing or misshapen entries raise."""
        named = self.named()
        missing = sorted(set(named) - set(state))
        if missing:
            raise CheckpointError(f"checkpoint lacks parameters: {missing[:3]}...")
        for name, tensor in named.items():
            values = np.asarray(state[name], dtype=np.float64)
            if values.shape != tensor.shape:
                raise CheckpointError(
                    f"{name}: checkpoint shape {values.shape} != model shape {tensor.shape}."
                )
            tensor.data[...] = values


@dataclass
class ForwardOutputs:
    f: list[Tensor]
    u: list[Tensor]
    z: list[Tensor]
    logits: list[Tensor] = field(default_factory=list)


@dataclass
class LossBreakdown:
    total: Tensor
    auxiliary: Tensor
    distillation: Tensor | None
    final: Tensor


def fused_width(n_omics: int, d_attn: int) -> int:
    """Width of ``Z^m`` for *n_omics* omics."""
    return (n_omics - 1) * d_attn if n_omics > 1 else d_attn


def build_model(
    dims: Sequence[int],
    omics: Sequence[str],
    n_classes: int,
    config: TrainConfig,
    use_cd: bool = True,
    seed: int | None = None,
    encoders: Sequence[GatEncoderParams] | None = None,
) -> ModelParams:
    """Initialise a model; pretrained *encoders* replace the random GAT init."""
    seed = config.seed if seed is None else seed
    omics = list(omics)
    if encoders is None:
        encoders = [
            init_encoder(
                component_rng(seed, "gat", name),
                d,
                config.gat_layers,
                config.gat_heads,
                config.gat_head_width,
                config.gat_slope,
            )
            for name, d in zip(omics, dims)
        ]
    for name, d, enc in zip(omics, dims, encoders):
        if enc.d_in != d:
            raise DimensionError(f"{name}: encoder expects {enc.d_in} features, data has {d}.")
    d_f = encoders[0].d_out
    multi = len(omics) > 1
    return ModelParams(
        omics=omics,
        n_classes=n_classes,
        encoders=[enc.copy() for enc in encoders],
        self_attention=[
            init_attention(component_rng(seed, "self_attn", name), d_f, config.d_attn)
            for name in omics
        ],
        cross_attention=[
            init_attention(component_rng(seed, "cross_attn", name), config.d_attn, config.d_attn)
            for name in omics
        ]
        if multi
        else [],
        heads=init_heads(
            seed,
            omics,
            d_f,
            fused_width(len(omics), config.d_attn),
            n_classes,
            config.head_hidden,
            use_cd,
        ),
        distill=init_distill(component_rng(seed, "distill"), len(omics), n_classes, config.d_e)
        if multi and use_cd
        else None,
    )


def forward(
    model: ModelParams,
    graphs: Sequence[SampleGraph],
    features: Sequence[Tensor],
    key_rows: ArrayLike | None = None,
) -> ForwardOutputs:
    """Run every omics through the full model; *key_rows* limits attention keys."""
    if len(graphs) != model.n_omics or len(features) != model.n_omics:
        raise DimensionError(
            f"model has {model.n_omics} omics, got {len(graphs)} graphs / {len(features)} inputs."
        )
    f = [encode(g, x, enc) for g, x, enc in zip(graphs, features, model.encoders)]
    fused = fuse(f, model.self_attention, model.cross_attention, key_rows)
    z = list(fused.z)
    logits: list[Tensor] = []
    if model.distill is not None:
        logits = [omics_logits(z_m, head) for z_m, head in zip(z, model.heads.logits)]
    elif model.heads.fusion:
        z = [elu(linear(z_m, layer)) for z_m, layer in zip(z, model.heads.fusion)]
    return ForwardOutputs(f=f, u=fused.u, z=z, logits=logits)


def compute_loss(
    model: ModelParams,
    outputs: ForwardOutputs,
    labels: ArrayLike,
    train_indices: ArrayLike,
    config: TrainConfig,
) -> LossBreakdown:
    """Auxiliary, distillation and final losses on training rows, and their weighted sum."""
    l_ac = auxiliary_loss(outputs.f, labels, train_indices, model.heads)
    l_cd = None
    if model.distill is not None:
        l_cd = cd_loss(
            [take_rows(z, train_indices) for z in outputs.logits],
            model.distill,
            config.symmetric_cd_grad,
        )
    l_final = final_loss(outputs.z, labels, train_indices, model.heads).loss
    return LossBreakdown(
        total=total_loss(l_ac, l_cd, l_final, config.loss_weights),
        auxiliary=l_ac,
        distillation=l_cd,
        final=l_final,
    )
