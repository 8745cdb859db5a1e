"""Versioned weight container (see docs/formats.md for the byte layout).

Layout: magic b"FGC1" | uint32-LE header length | UTF-8 JSON header |
raw tensor data. The header maps each tensor name to shape, dtype and
offset into the data region; values are little-endian, C order.
"""
from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from ..errors import DataError

MAGIC = b"FGC1"
VERSION = 1


def save_checkpoint(path: str | Path, tensors: dict, config: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    blobs = []
    offset = 0
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name])
        blob = arr.astype(arr.dtype.newbyteorder("<")).tobytes()
        entries.append({"name": name, "shape": list(arr.shape),
                        "dtype": arr.dtype.str.lstrip("<>=|"),
                        "offset": offset, "nbytes": len(blob)})
        blobs.append(blob)
        offset += len(blob)
    header = json.dumps({"version": VERSION, "config": config or {},
                         "tensors": entries}).encode("utf-8")
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(len(header).to_bytes(4, "little"))
        f.write(header)
        for blob in blobs:
            f.write(blob)
    os.replace(tmp, path)


def load_checkpoint(path: str | Path):
    """Returns (tensors, config)."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != MAGIC:
        raise DataError(f"{path}: not a checkpoint container")
    hlen = int.from_bytes(raw[4:8], "little")
    header = json.loads(raw[8:8 + hlen].decode("utf-8"))
    if header.get("version") != VERSION:
        raise DataError(f"{path}: unsupported container version")
    base = 8 + hlen
    tensors = {}
    for e in header["tensors"]:
        dt = np.dtype(e["dtype"]).newbyteorder("<")
        start = base + e["offset"]
        arr = np.frombuffer(raw, dtype=dt, count=int(np.prod(e["shape"], dtype=int)),
                            offset=start)
        tensors[e["name"]] = arr.reshape(e["shape"]).astype(dt.newbyteorder("="))
    return tensors, header["config"]


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def assign_tensors(target: dict, source: dict) -> None:
    """Copy source arrays into target's same-named arrays in place."""
    missing = set(target) - set(source)
    if missing:
        raise DataError(f"checkpoint missing tensors: {sorted(missing)[:5]}")
    for name, arr in target.items():
        src = source[name]
        if tuple(src.shape) != tuple(arr.shape):
            raise DataError(f"tensor {name}: shape {src.shape} != {arr.shape}")
        arr[...] = src
