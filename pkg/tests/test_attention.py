"""Tests for sample-axis self-attention and cross-omics attention."""

from __future__ import annotations

import numpy as np
import pytest

from app.attention import (
    AttentionParams,
    cross_attend,
    fuse,
    init_attention,
    scaled_dot_attention,
    self_attend,
)
from app.errors import DimensionError
from app.tensor import Tensor, total_sum


def _softmax_rows(s):
    e = np.exp(s - s.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def _direct(q_from, kv_from, q_params, kv_params):
    q = q_from @ q_params.query.data
    k = kv_from @ kv_params.key.data
    v = kv_from @ kv_params.value.data
    return _softmax_rows(q @ k.T / np.sqrt(q.shape[1])) @ v


def test_single_sample_returns_value_row(rng):
    params = init_attention(rng, 4, 3)
    f = rng.standard_normal((1, 4))
    out = self_attend(Tensor(f), params).data
    assert np.allclose(out, f @ params.value.data, atol=1e-14)


def test_identical_keys_average_values(rng):
    q = Tensor(rng.standard_normal((3, 2)))
    k = Tensor(np.tile([0.5, -1.0], (4, 1)))
    v = rng.standard_normal((4, 3))
    out = scaled_dot_attention(q, k, Tensor(v)).data
    assert np.allclose(out, np.tile(v.mean(axis=0), (3, 1)))


def test_self_attention_matches_direct_formula(rng):
    params = init_attention(rng, 5, 4)
    f = rng.standard_normal((6, 5))
    assert np.allclose(self_attend(Tensor(f), params).data, _direct(f, f, params, params), atol=1e-12)


def test_self_attention_key_rows(rng):
    params = init_attention(rng, 3, 2)
    f = rng.standard_normal((5, 3))
    keys = [0, 2, 3]
    out = self_attend(Tensor(f), params, key_rows=keys).data
    assert out.shape == (5, 2)
    assert np.allclose(out, _direct(f, f[keys], params, params), atol=1e-12)


def test_cross_attention_matches_loop_oracle(rng):
    widths = [4, 4, 4]
    params = [init_attention(rng, w, 3) for w in widths]
    u = [rng.standard_normal((5, w)) for w in widths]
    z = cross_attend([Tensor(x) for x in u], params)
    for m in range(3):
        expected = np.hstack([_direct(u[m], u[j], params[m], params[j]) for j in range(3) if j != m])
        assert z[m].shape == (5, 2 * 3)
        assert np.allclose(z[m].data, expected, atol=1e-12)


def test_cross_attention_two_omics_has_single_block(rng):
    params = [init_attention(rng, 3, 2) for _ in range(2)]
    u = [Tensor(rng.standard_normal((4, 3))) for _ in range(2)]
    assert [t.shape for t in cross_attend(u, params)] == [(4, 2), (4, 2)]


def test_fuse_chains_self_and_cross_attention(rng):
    f = [Tensor(rng.standard_normal((5, w))) for w in (6, 4)]
    self_params = [init_attention(rng, w, 3) for w in (6, 4)]
    cross_params = [init_attention(rng, 3, 2) for _ in range(2)]
    fused = fuse(f, self_params, cross_params)
    u = [self_attend(x, p) for x, p in zip(f, self_params)]
    assert all(np.array_equal(a.data, b.data) for a, b in zip(fused.u, u))
    for a, b in zip(fused.z, cross_attend(u, cross_params)):
        assert np.array_equal(a.data, b.data)


def test_fuse_single_omics_passes_self_attention_through(rng):
    fused = fuse([Tensor(rng.standard_normal((4, 3)))], [init_attention(rng, 3, 2)], [init_attention(rng, 2, 2)])
    assert fused.z[0] is fused.u[0]


def test_cross_attention_row_mismatch(rng):
    params = [init_attention(rng, 3, 2) for _ in range(2)]
    with pytest.raises(DimensionError):
        cross_attend([Tensor(np.ones((4, 3))), Tensor(np.ones((5, 3)))], params)


def test_self_attention_width_mismatch(rng):
    with pytest.raises(DimensionError):
        self_attend(Tensor(np.ones((2, 7))), init_attention(rng, 3, 2))


def test_qkv_widths_must_agree(rng):
    with pytest.raises(DimensionError):
        AttentionParams(
            Tensor.parameter(np.ones((3, 2))),
            Tensor.parameter(np.ones((3, 2))),
            Tensor.parameter(np.ones((3, 4))),
        )


def test_attention_gradient(rng, grad_check):
    params = [init_attention(rng, 3, 2) for _ in range(3)]
    u = [Tensor(rng.standard_normal((4, 3))) for _ in range(3)]
    target = [Tensor(rng.standard_normal((4, 4))) for _ in range(3)]

    def loss():
        z = cross_attend([self_attend(x, p) for x, p in zip(u, params)], params)
        total = total_sum(z[0] * target[0])
        for zm, t in zip(z[1:], target[1:]):
            total = total + total_sum(zm * t)
        return total

    flat = [t for p in params for t in p.named("a").values()]
    assert grad_check(loss, flat) < 1e-4
