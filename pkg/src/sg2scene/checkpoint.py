"""Single-file checkpoint container.

Layout: 8-byte magic, little-endian uint32 format version, uint64 header
length, JSON header (sorted keys) describing kind, config echo, step counter
and the array table, then the concatenated little-endian float32 array data
in table order. Writing is byte-deterministic for identical contents.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

MAGIC = b"SG2SCKPT"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


@dataclass(frozen=True)
class Checkpoint:
    kind: str
    config: dict[str, Any]
    step: int
    arrays: dict[str, np.ndarray]


def save_checkpoint(path: str | Path, ckpt: Checkpoint) -> None:
    entries = []
    offset = 0
    names = sorted(ckpt.arrays)
    buffers = []
    for name in names:
        src = np.asarray(ckpt.arrays[name])
        arr = np.ascontiguousarray(src, dtype="<f4")  # promotes 0-d to 1-d
        entries.append({"name": name, "shape": list(src.shape), "offset": offset})
        buffers.append(arr.tobytes())
        offset += arr.nbytes
    header = json.dumps(
        {"kind": ckpt.kind, "config": ckpt.config, "step": ckpt.step, "arrays": entries},
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for buf in buffers:
            fh.write(buf)


def load_checkpoint(path: str | Path) -> Checkpoint:
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file (bad magic)")
    (version,) = struct.unpack_from("<I", raw, 8)
    if version != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    (header_len,) = struct.unpack_from("<Q", raw, 12)
    header_end = 20 + header_len
    try:
        header = json.loads(raw[20:header_end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupt header: {exc}") from None
    arrays = {}
    data = raw[header_end:]
    for entry in header["arrays"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        start = entry["offset"]
        arr = np.frombuffer(data, dtype="<f4", count=count, offset=start).reshape(shape)
        arrays[entry["name"]] = arr.copy()
    return Checkpoint(kind=header["kind"], config=header["config"], step=header["step"], arrays=arrays)


def checkpoint_hash(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
