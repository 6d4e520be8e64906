"""
Multi-head graph attention encoder.

Per head h, node i aggregates its neighbours j in N(i)::

    e_ij  = leaky_relu(a_h . [W_h x_i || W_h x_j])
    alpha = row_softmax over N(i) of e
    h_i   = sum_j alpha_ij W_h x_j

Heads are concatenated; layers are joined by ELU.

Public API
----------
GatLayerParams, GatEncoderParams
init_encoder(rng, d_in, layers, heads, head_width, slope) -> GatEncoderParams
gat_layer(features, graph, params) -> Tensor
encode(graph, features, params) -> Tensor
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from app.errors import CheckpointError, DimensionError
from app.graph import SampleGraph
from app.params import xavier_uniform
from app.tensor import Tensor, concat, elu, leaky_relu, matmul, row_softmax, take_rows, transpose


@dataclass
class GatLayerParams:
    weights: list[Tensor]  # per head, d_in x d_head
    attn: list[Tensor]  # per head, (2 * d_head) x 1
    slope: float = 0.2

    @property
    def heads(self) -> int:
        return len(self.weights)

    @property
    def d_in(self) -> int:
        return self.weights[0].shape[0]

    @property
    def d_head(self) -> int:
        return self.weights[0].shape[1]

    @property
    def d_out(self) -> int:
        return self.heads * self.d_head

    def named(self, prefix: str) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for h, (w, a) in enumerate(zip(self.weights, self.attn)):
            out[f"{prefix}.head{h}.W"] = w
            out[f"{prefix}.head{h}.a"] = a
        return out


@dataclass
class GatEncoderParams:
    layers: list[GatLayerParams]

    @property
    def d_in(self) -> int:
        return self.layers[0].d_in

    @property
    def d_out(self) -> int:
        return self.layers[-1].d_out

    def named(self, prefix: str) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for i, layer in enumerate(self.layers):
            out.update(layer.named(f"{prefix}.layer{i}"))
        return out

    def parameters(self) -> list[Tensor]:
        """Flat list of trainable tensors."""
        return list(self.named("").values())

    def copy(self) -> GatEncoderParams:
        """Independent copy with fresh parameter tensors."""
        return GatEncoderParams(
            [
                GatLayerParams(
                    weights=[Tensor.parameter(w.data) for w in layer.weights],
                    attn=[Tensor.parameter(a.data) for a in layer.attn],
                    slope=layer.slope,
                )
                for layer in self.layers
            ]
        )

    def load_state(self, state: Mapping[str, np.ndarray], prefix: str) -> None:
        """Copy this encoder's arrays from *state* in place."""
        for name, tensor in self.named(prefix).items():
            if name not in state:
                raise CheckpointError(f"checkpoint lacks {name!r}.")
            if state[name].shape != tensor.shape:
                raise CheckpointError(
                    f"{name}: checkpoint shape {state[name].shape} != {tensor.shape}."
                )
            tensor.data[...] = state[name]


def init_encoder(
    rng: np.random.Generator,
    d_in: int,
    layers: int = 2,
    heads: int = 4,
    head_width: int = 64,
    slope: float = 0.2,
) -> GatEncoderParams:
    """Xavier-uniform initialised encoder."""
    stack = []
    width = d_in
    for _ in range(layers):
        stack.append(
            GatLayerParams(
                weights=[xavier_uniform(rng, width, head_width) for _ in range(heads)],
                attn=[xavier_uniform(rng, 2 * head_width, 1) for _ in range(heads)],
                slope=slope,
            )
        )
        width = heads * head_width
    return GatEncoderParams(stack)


def gat_layer(features: Tensor, graph: SampleGraph, params: GatLayerParams) -> Tensor:
    """One multi-head GAT layer; head outputs are concatenated."""
    n, d = features.shape
    if graph.n != n:
        raise DimensionError(f"graph has {graph.n} nodes, features have {n} rows.")
    if d != params.d_in:
        raise DimensionError(f"layer expects {params.d_in} input features, got {d}.")
    left = np.arange(params.d_head)
    right = left + params.d_head
    outputs = []
    for w, a in zip(params.weights, params.attn):
        wx = matmul(features, w)
        src = matmul(wx, take_rows(a, left))  # n x 1, the a . W x_i half
        dst = matmul(wx, take_rows(a, right))  # n x 1, the a . W x_j half
        scores = leaky_relu(src + transpose(dst), params.slope)
        alpha = row_softmax(scores, graph.edges)
        outputs.append(matmul(alpha, wx))
    return outputs[0] if len(outputs) == 1 else concat(outputs, axis=1)


def encode(graph: SampleGraph, features: Tensor, params: GatEncoderParams) -> Tensor:
    """Stack of GAT layers with ELU between consecutive layers."""
    x = features
    for i, layer in enumerate(params.layers):
        if i:
            x = elu(x)
        x = gat_layer(x, graph, layer)
    return x
