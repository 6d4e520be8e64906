"""
Binary checkpoint container.

Layout (all integers little-endian)::

    magic      4 bytes   b"MVKT"
    version    uint16
    kind       uint8     0 = pretrained, 1 = random, 2 = model
    config     32 bytes  SHA-256 of the TrainConfig JSON
    count      uint32
    count x blob:
        name_len uint16, name (UTF-8)
        ndim     uint8,  dims (uint32 each)
        values   float64 little-endian, row-major
"""

from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np
from numpy.typing import NDArray

from app.errors import CheckpointError
from app.schemas import CheckpointKind

logger = logging.getLogger(__name__)

MAGIC = b"MVKT"
FORMAT_VERSION = 1
_KIND_CODES = {
    CheckpointKind.PRETRAINED: 0,
    CheckpointKind.RANDOM: 1,
    CheckpointKind.MODEL: 2,
}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}
_HEADER = struct.Struct("<4sHB32sI")


@dataclass
class Checkpoint:
    kind: CheckpointKind
    config_hash: bytes
    state: dict[str, NDArray[np.float64]]
    version: int = FORMAT_VERSION


def write_checkpoint(
    path: str | Path,
    state: Mapping[str, NDArray[np.float64]],
    config_hash: bytes,
    kind: CheckpointKind,
) -> Path:
    """Write named arrays behind the magic, version, kind and config fingerprint."""
    if len(config_hash) != 32:
        raise CheckpointError("config hash must be 32 bytes.")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    chunks = [_HEADER.pack(MAGIC, FORMAT_VERSION, _KIND_CODES[kind], config_hash, len(state))]
    for name, values in state.items():
        encoded = name.encode("utf-8")
        arr = np.ascontiguousarray(values, dtype="<f8")
        chunks.append(struct.pack("<H", len(encoded)) + encoded)
        chunks.append(struct.pack(f"<B{arr.ndim}I", arr.ndim, *arr.shape))
        chunks.append(arr.tobytes(order="C"))
    path.write_bytes(b"".join(chunks))
    logger.debug("Wrote %s checkpoint %s (%d tensors)", kind.value, path, len(state))
    return path


def read_checkpoint(path: str | Path) -> Checkpoint:
    """Parse a checkpoint file; any structural defect raises ``CheckpointError``."""
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"Checkpoint not found: {path}")
    buf = path.read_bytes()
    try:
        magic, version, code, config_hash, count = _HEADER.unpack_from(buf, 0)
        if magic != MAGIC:
            raise CheckpointError(f"{path}: bad magic {magic!r}.")
        if version != FORMAT_VERSION:
            raise CheckpointError(f"{path}: unsupported format version {version}.")
        offset = _HEADER.size
        state: dict[str, NDArray[np.float64]] = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", buf, offset)
            offset += 2
            name = buf[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (ndim,) = struct.unpack_from("<B", buf, offset)
            offset += 1
            shape = struct.unpack_from(f"<{ndim}I", buf, offset)
            offset += 4 * ndim
            size = int(np.prod(shape, dtype=np.int64))
            if offset + 8 * size > len(buf):
                raise CheckpointError(f"{path}: truncated blob {name!r}.")
            state[name] = (
                np.frombuffer(buf, dtype="<f8", count=size, offset=offset)
                .astype(np.float64)
                .reshape(shape)
            )
            offset += 8 * size
    except struct.error as exc:
        raise CheckpointError(f"{path}: truncated checkpoint ({exc}).") from exc
    if code not in _CODE_KINDS:
        raise CheckpointError(f"{path}: unknown checkpoint kind {code}.")
    return Checkpoint(_CODE_KINDS[code], config_hash, state, version)
