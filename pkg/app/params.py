"""
Shared parameter building blocks: seeded RNG streams, Xavier init,
linear layers and small perceptrons.

Every component draws its initial weights from its own RNG stream keyed
by ``(seed, component, ...)``, so switching one component on or off never
shifts the initialisation of another.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from app.tensor import Tensor, elu, matmul


def component_rng(seed: int, *keys: object) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``."""
    tag = zlib.crc32("/".join(str(k) for k in keys).encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([seed, tag]))


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> Tensor:
    """Glorot-uniform ``(fan_in, fan_out)`` parameter."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor.parameter(rng.uniform(-limit, limit, size=(fan_in, fan_out)))


@dataclass
class LinearParams:
    """``x @ weight + bias``."""

    weight: Tensor
    bias: Tensor

    @classmethod
    def create(cls, rng: np.random.Generator, d_in: int, d_out: int) -> LinearParams:
        """Xavier-uniform weight and zero bias."""
        return cls(xavier_uniform(rng, d_in, d_out), Tensor.parameter(np.zeros((1, d_out))))

    @property
    def d_in(self) -> int:
        return self.weight.shape[0]

    @property
    def d_out(self) -> int:
        return self.weight.shape[1]

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {f"{prefix}.weight": self.weight, f"{prefix}.bias": self.bias}


@dataclass
class MlpParams:
    """Stack of linear layers with ELU between them (none after the last)."""

    layers: list[LinearParams]

    @classmethod
    def create(cls, rng: np.random.Generator, dims: list[int]) -> MlpParams:
        """One linear layer per consecutive pair in *dims*."""
        return cls([LinearParams.create(rng, a, b) for a, b in zip(dims[:-1], dims[1:])])

    @property
    def d_in(self) -> int:
        return self.layers[0].d_in

    @property
    def d_out(self) -> int:
        return self.layers[-1].d_out

    def named(self, prefix: str) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for i, layer in enumerate(self.layers):
            out.update(layer.named(f"{prefix}.{i}"))
        return out


def linear(x: Tensor, params: LinearParams) -> Tensor:
    """``x W + b``."""
    return matmul(x, params.weight) + params.bias


def mlp(x: Tensor, params: MlpParams) -> Tensor:
    """Linear layers with ELU between them, none after the last."""
    for i, layer in enumerate(params.layers):
        if i:
            x = elu(x)
        x = linear(x, layer)
    return x
