"""Versioned binary checkpoints: fixed header, JSON metadata, npz payload."""
from __future__ import annotations

import io
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"FLCK"
VERSION = 1
_HEADER = struct.Struct("<4sH4sI")


class CheckpointError(ValueError):
    pass


def write_checkpoint(path, kind: str, meta: dict, arrays: dict) -> None:
    tag = kind.encode("ascii")
    if len(tag) != 4:
        raise ValueError("checkpoint kind must be 4 ASCII characters")
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    payload = io.BytesIO()
    np.savez(payload, **arrays)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, tag, len(meta_bytes)))
        fh.write(meta_bytes)
        fh.write(payload.getvalue())


def read_checkpoint(path, kind: str) -> tuple[dict, dict]:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise CheckpointError("truncated checkpoint header")
    magic, version, tag, meta_len = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise CheckpointError("not a forage_lab checkpoint")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    if tag != kind.encode("ascii"):
        raise CheckpointError(f"checkpoint holds {tag!r}, expected {kind!r}")
    start = _HEADER.size
    meta = json.loads(data[start:start + meta_len].decode("utf-8"))
    with np.load(io.BytesIO(data[start + meta_len:])) as npz:
        arrays = {name: npz[name] for name in npz.files}
    return meta, arrays
