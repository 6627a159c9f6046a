"""Binary checkpoint format: version tag, optional JSON metadata, then named
tensors stored as (name, shape, little-endian float64 data).

Round-trips are bit-exact; the same bytes always load to the same arrays.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

_MAGIC = b"PLNN"
_VERSION = 1


class CheckpointError(IOError):
    pass


def write_checkpoint(path: str | Path, tensors: dict[str, np.ndarray],
                     meta: dict | None = None) -> None:
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(struct.pack("<I", len(meta_bytes)))
        fh.write(meta_bytes)
        fh.write(struct.pack("<I", len(tensors)))
        for name, arr in tensors.items():
            data = np.ascontiguousarray(arr, dtype="<f8")
            name_b = name.encode("utf-8")
            fh.write(struct.pack("<H", len(name_b)))
            fh.write(name_b)
            fh.write(struct.pack("<B", data.ndim))
            for dim in data.shape:
                fh.write(struct.pack("<q", dim))
            fh.write(data.tobytes())


def read_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    raw = Path(path).read_bytes()
    if raw[:4] != _MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint file")
    off = 4
    (version,) = struct.unpack_from("<I", raw, off)
    off += 4
    if version != _VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack_from("<I", raw, off)
    off += 4
    meta = json.loads(raw[off:off + meta_len].decode("utf-8"))
    off += meta_len
    (count,) = struct.unpack_from("<I", raw, off)
    off += 4
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<H", raw, off)
        off += 2
        name = raw[off:off + name_len].decode("utf-8")
        off += name_len
        (ndim,) = struct.unpack_from("<B", raw, off)
        off += 1
        shape = struct.unpack_from(f"<{ndim}q", raw, off) if ndim else ()
        off += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(raw, dtype="<f8", count=size, offset=off).reshape(shape)
        off += 8 * size
        tensors[name] = arr.astype(np.float64).copy()
    return tensors, meta
