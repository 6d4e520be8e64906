"""Tests for the binary checkpoint container."""

from __future__ import annotations

import hashlib

import numpy as np
import pytest

from app.checkpoint import MAGIC, read_checkpoint, write_checkpoint
from app.errors import CheckpointError
from app.schemas import CheckpointKind

HASH = hashlib.sha256(b"config").digest()


def test_round_trip_is_exact(tmp_path, rng):
    state = {
        "gat.mRNA.0.W.0": rng.standard_normal((3, 4)),
        "heads.final.0.bias": rng.standard_normal((1, 4)),
        "distill.W2": np.array([[np.pi], [-0.0]]),
    }
    path = write_checkpoint(tmp_path / "ckpt" / "a.ckpt", state, HASH, CheckpointKind.MODEL)
    loaded = read_checkpoint(path)
    assert loaded.kind is CheckpointKind.MODEL
    assert loaded.config_hash == HASH
    assert list(loaded.state) == list(state)
    for name, values in state.items():
        assert loaded.state[name].shape == values.shape
        assert loaded.state[name].tobytes() == values.tobytes()


def test_file_starts_with_magic(tmp_path):
    path = write_checkpoint(tmp_path / "a.ckpt", {}, HASH, CheckpointKind.RANDOM)
    assert path.read_bytes()[:4] == MAGIC
    assert read_checkpoint(path).kind is CheckpointKind.RANDOM


def test_bad_magic(tmp_path):
    path = write_checkpoint(tmp_path / "a.ckpt", {"w": np.ones((2, 2))}, HASH, CheckpointKind.PRETRAINED)
    path.write_bytes(b"NOPE" + path.read_bytes()[4:])
    with pytest.raises(CheckpointError, match="magic"):
        read_checkpoint(path)


def test_truncated_file(tmp_path):
    path = write_checkpoint(tmp_path / "a.ckpt", {"w": np.ones((5, 5))}, HASH, CheckpointKind.PRETRAINED)
    path.write_bytes(path.read_bytes()[:-16])
    with pytest.raises(CheckpointError, match="truncated"):
        read_checkpoint(path)


def test_truncated_header(tmp_path):
    path = tmp_path / "a.ckpt"
    path.write_bytes(MAGIC + b"\x01")
    with pytest.raises(CheckpointError):
        read_checkpoint(path)


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError):
        read_checkpoint(tmp_path / "none.ckpt")


def test_hash_length_checked(tmp_path):
    with pytest.raises(CheckpointError):
        write_checkpoint(tmp_path / "a.ckpt", {}, b"short", CheckpointKind.MODEL)
