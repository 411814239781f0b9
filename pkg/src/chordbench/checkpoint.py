"""Flat binary parameter checkpoints (format in docs/checkpoint.md).

A checkpoint stores a JSON metadata block (the labeler config plus any
extras such as normalization statistics and the feature kind) followed by
named tensors in 32- or 64-bit little-endian floats.
"""

from __future__ import annotations

import dataclasses
import json
import struct

import numpy as np

from .labeler import LabelerConfig

CHECKPOINT_MAGIC = b"CBCK"
CHECKPOINT_VERSION = 1


class CheckpointError(ValueError):
    """Raised for unreadable or inconsistent checkpoint files."""


def save_checkpoint(path, config: LabelerConfig, params: dict,
                    extra: dict | None = None) -> None:
    meta = {"config": dataclasses.asdict(config), "extra": extra or {}}
    blob = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<II", CHECKPOINT_VERSION, len(blob)))
        fh.write(blob)
        fh.write(struct.pack("<I", len(params)))
        for name, tensor in params.items():
            data = np.asarray(tensor)
            if data.dtype == np.float32:
                width = 4
            elif data.dtype == np.float64:
                width = 8
            else:
                raise CheckpointError(
                    f"tensor {name!r} has unsupported dtype {data.dtype}")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<H", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<BB", width, data.ndim))
            fh.write(struct.pack(f"<{data.ndim}I", *data.shape))
            fh.write(np.ascontiguousarray(data, dtype=f"<f{width}").tobytes())


def load_checkpoint(path):
    """Returns ``(config, params, extra)``."""
    with open(path, "rb") as fh:
        if fh.read(4) != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file")
        version, blob_len = struct.unpack("<II", fh.read(8))
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"{path}: unsupported version {version}")
        meta = json.loads(fh.read(blob_len).decode("utf-8"))
        config = LabelerConfig(**meta["config"])
        (n_tensors,) = struct.unpack("<I", fh.read(4))
        params = {}
        for _ in range(n_tensors):
            (name_len,) = struct.unpack("<H", fh.read(2))
            name = fh.read(name_len).decode("utf-8")
            width, ndim = struct.unpack("<BB", fh.read(2))
            shape = struct.unpack(f"<{ndim}I", fh.read(4 * ndim))
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(width * count), dtype=f"<f{width}")
            if data.size != count:
                raise CheckpointError(f"{path}: truncated tensor {name!r}")
            dtype = np.float32 if width == 4 else np.float64
            params[name] = data.reshape(shape).astype(dtype)
    return config, params, meta.get("extra", {})
