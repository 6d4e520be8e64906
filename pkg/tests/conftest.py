"""Shared fixtures: toy datasets, a tiny training config and a gradient checker."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import pytest

from app.data import Dataset, synthesize_dataset, write_dataset
from app.schemas import TrainConfig
from app.tensor import GradientTape, Tensor


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_config() -> TrainConfig:
    """Small architecture and few epochs; everything else at defaults."""
    return TrainConfig(
        pretrain_epochs=3,
        finetune_epochs=4,
        gat_layers=1,
        gat_heads=2,
        gat_head_width=4,
        proj_dim=4,
        d_attn=4,
        d_e=3,
        head_hidden=4,
        n_runs=2,
        log_every=1000,
    )


@pytest.fixture
def toy_dataset() -> Dataset:
    return synthesize_dataset(24, [8, 6, 5], 2, [0.5, 0.5, 0.5], seed=3)


@pytest.fixture
def dataset_dir(tmp_path, toy_dataset):
    return write_dataset(toy_dataset, tmp_path / "toy")


def _relative_error(a: np.ndarray, b: np.ndarray) -> float:
    scale = np.linalg.norm(a) + np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / scale) if scale > 1e-12 else 0.0


@pytest.fixture
def grad_check() -> Callable[..., float]:
    """Return ``check(loss_fn, params, h=1e-5) -> worst relative error``.

    *loss_fn* rebuilds the scalar loss from the current parameter values.
    Tape gradients are compared with central finite differences.
    """

    def check(loss_fn: Callable[[], Tensor], params: Sequence[Tensor], h: float = 1e-5) -> float:
        with GradientTape() as tape:
            loss = loss_fn()
        analytic = tape.gradient(loss, params)
        worst = 0.0
        for p, g in zip(params, analytic):
            numeric = np.zeros_like(p.data)
            for idx in np.ndindex(p.shape):
                original = p.data[idx]
                p.data[idx] = original + h
                up = loss_fn().item()
                p.data[idx] = original - h
                down = loss_fn().item()
                p.data[idx] = original
                numeric[idx] = (up - down) / (2 * h)
            worst = max(worst, _relative_error(g, numeric))
        return worst

    return check
