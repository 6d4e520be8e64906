"""Tests for classifier heads and the combined objective."""

from __future__ import annotations

import math

import numpy as np
import pytest

from app.errors import DimensionError, NonFiniteLossError
from app.heads import (
    auxiliary_loss,
    final_logits,
    final_loss,
    init_heads,
    omics_logits,
    total_loss,
)
from app.params import LinearParams
from app.schemas import LossWeights
from app.tensor import Tensor, cross_entropy_logits

OMICS = ["mRNA", "methy", "miRNA"]


def _zero(heads):
    for t in heads.named("h").values():
        t.data[...] = 0.0
    return heads


def test_uniform_auxiliary_logits_give_m_ln_c(rng):
    heads = _zero(init_heads(0, OMICS, d_f=4, d_z=3, n_classes=2, hidden=5))
    f_all = [Tensor(rng.standard_normal((6, 4))) for _ in OMICS]
    labels = np.array([0, 1, 0, 1, 1, 0])
    loss = auxiliary_loss(f_all, labels, np.arange(6), heads)
    assert math.isclose(loss.item(), 3 * math.log(2), rel_tol=1e-12)


def test_saturated_correct_logits_cost_nothing():
    loss = cross_entropy_logits(Tensor([[100.0, -100.0], [-100.0, 100.0]]), [0, 1])
    assert loss.item() < 1e-8


def test_total_loss_hand_value():
    total = total_loss(Tensor(2.0), Tensor(4.0), Tensor(1.0), LossWeights(lambda1=1.0, lambda2=0.005))
    assert math.isclose(total.item(), 3.02, rel_tol=1e-12)


def test_total_loss_without_distillation():
    total = total_loss(Tensor(2.0), None, Tensor(1.0), LossWeights())
    assert math.isclose(total.item(), 3.0)


def test_zero_weights_reduce_to_final_loss():
    total = total_loss(Tensor(2.0), Tensor(4.0), Tensor(0.7), LossWeights(lambda1=0.0, lambda2=0.0))
    assert math.isclose(total.item(), 0.7)


def test_non_finite_term_names_its_phase():
    with pytest.raises(NonFiniteLossError) as info:
        total_loss(Tensor(1.0), Tensor(float("nan")), Tensor(1.0), LossWeights())
    assert info.value.phase == "distillation"


def test_loss_uses_only_training_rows(rng):
    heads = init_heads(1, OMICS[:2], d_f=3, d_z=4, n_classes=2, hidden=4)
    z_all = [Tensor(rng.standard_normal((5, 4))) for _ in range(2)]
    train = np.array([0, 2, 3])
    labels = np.array([0, 1, 1, 0, -1])
    a = final_loss(z_all, labels, train, heads).loss.item()
    labels[1] = 0
    b = final_loss(z_all, labels, train, heads).loss.item()
    assert a == b


def test_final_output_predictions(rng):
    heads = init_heads(2, OMICS, d_f=3, d_z=2, n_classes=3, hidden=4)
    z_all = [Tensor(rng.standard_normal((4, 2))) for _ in OMICS]
    out = final_loss(z_all, np.array([0, 1, 2, 0]), np.arange(4), heads)
    assert out.logits.shape == (4, 3)
    assert np.array_equal(out.predictions, out.logits.data.argmax(axis=1))


def test_final_head_width_check(rng):
    heads = init_heads(0, OMICS, d_f=3, d_z=2, n_classes=2)
    with pytest.raises(DimensionError):
        final_logits([Tensor(np.ones((2, 3))) for _ in OMICS], heads)


def test_omics_logits_zero_weights(rng):
    layer = LinearParams.create(rng, 4, 3)
    layer.weight.data[...] = 0.0
    assert not omics_logits(Tensor(rng.standard_normal((5, 4))), layer).data.any()


def test_init_heads_arms(rng):
    with_cd = init_heads(0, OMICS, d_f=3, d_z=2, n_classes=2)
    without = init_heads(0, OMICS, d_f=3, d_z=2, n_classes=2, use_cd=False)
    single = init_heads(0, OMICS[:1], d_f=3, d_z=2, n_classes=2)
    assert (len(with_cd.logits), len(with_cd.fusion)) == (3, 0)
    assert (len(without.logits), len(without.fusion)) == (0, 3)
    assert (len(single.logits), len(single.fusion)) == (0, 0)
    # switching distillation off leaves the auxiliary and final initialisation untouched
    assert np.array_equal(with_cd.final.layers[0].weight.data, without.final.layers[0].weight.data)


def test_empty_training_set(rng):
    heads = init_heads(0, OMICS[:2], d_f=3, d_z=2, n_classes=2)
    with pytest.raises(DimensionError):
        auxiliary_loss([Tensor(np.ones((2, 3)))] * 2, [0, 1], [], heads)


def test_head_gradient(rng, grad_check):
    heads = init_heads(3, OMICS[:2], d_f=3, d_z=2, n_classes=3, hidden=4)
    f_all = [Tensor(rng.standard_normal((5, 3))) for _ in range(2)]
    z_all = [Tensor(rng.standard_normal((5, 2))) for _ in range(2)]
    labels = np.array([0, 1, 2, 1, 0])

    def loss():
        return auxiliary_loss(f_all, labels, np.arange(5), heads) + final_loss(
            z_all, labels, np.arange(5), heads
        ).loss

    assert grad_check(loss, list(heads.named("h").values())) < 1e-4
