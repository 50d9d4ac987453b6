"""Versioned binary parameter checkpoints.

Layout: magic ``ZLCP``, little-endian u32 format version, u64 header
length, JSON header, then raw float32 data for each entry in header
order. The header records precision mode, creation seed and optional
config hash/text, so loads can verify compatibility.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"ZLCP"
VERSION = 1


class CheckpointError(RuntimeError):
    pass


def save_checkpoint(path, named_arrays, precision: str, seed: int, config_hash: str | None = None, extra: dict | None = None):
    """Write (name, ndarray) pairs as row-major float32 with a JSON header."""
    entries = []
    blobs = []
    for name, arr in named_arrays:
        arr = np.ascontiguousarray(arr, dtype=np.float32)
        entries.append({"name": name, "shape": list(arr.shape)})
        blobs.append(arr.tobytes())
    header = {
        "precision": precision,
        "seed": int(seed),
        "config_hash": config_hash,
        "params": entries,
    }
    if extra:
        header["extra"] = extra
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<Q", len(raw)))
        f.write(raw)
        for blob in blobs:
            f.write(blob)


def load_checkpoint(path):
    """Return (header dict, {name: float32 ndarray})."""
    path = Path(path)
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != MAGIC:
            raise CheckpointError(f"{path}: not a checkpoint file (bad magic {magic!r})")
        (version,) = struct.unpack("<I", f.read(4))
        if version != VERSION:
            raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
        (hlen,) = struct.unpack("<Q", f.read(8))
        header = json.loads(f.read(hlen).decode("utf-8"))
        arrays = {}
        for entry in header["params"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = f.read(count * 4)
            if len(buf) != count * 4:
                raise CheckpointError(f"{path}: truncated data for {entry['name']!r}")
            arrays[entry["name"]] = np.frombuffer(buf, dtype=np.float32).reshape(shape).copy()
    return header, arrays
