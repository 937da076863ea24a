"""APLCKPT1 container for named float arrays.

Layout (little-endian): magic, u64 count, then per array: u64 name length,
utf-8 name, u64 rank, u64 extents, f32 row-major data.
"""
from __future__ import annotations

import struct

import numpy as np

MAGIC = b"APLCKPT1"
_U64 = struct.Struct("<Q")


class CheckpointError(ValueError):
    pass


def save_arrays(path, arrays: dict) -> None:
    chunks = [MAGIC, _U64.pack(len(arrays))]
    for name in sorted(arrays):
        arr = np.asarray(arrays[name])
        raw = name.encode("utf-8")
        chunks += [_U64.pack(len(raw)), raw, _U64.pack(arr.ndim)]
        chunks += [_U64.pack(n) for n in arr.shape]
        chunks.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    with open(path, "wb") as f:
        f.write(b"".join(chunks))


def load_arrays(path) -> dict:
    with open(path, "rb") as f:
        blob = f.read()
    if not blob.startswith(MAGIC):
        raise CheckpointError(f"{path}: not an APLCKPT1 file")
    pos = len(MAGIC)

    def u64():
        nonlocal pos
        if pos + 8 > len(blob):
            raise CheckpointError(f"{path}: truncated")
        (v,) = _U64.unpack_from(blob, pos)
        pos += 8
        return v

    out = {}
    for _ in range(u64()):
        n = u64()
        name = blob[pos:pos + n].decode("utf-8")
        pos += n
        shape = tuple(u64() for _ in range(u64()))
        size = int(np.prod(shape, dtype=np.int64)) * 4
        if pos + size > len(blob):
            raise CheckpointError(f"{path}: truncated data for {name!r}")
        out[name] = np.frombuffer(blob, dtype="<f4", count=size // 4, offset=pos).reshape(shape).astype(np.float32)
        pos += size
    if pos != len(blob):
        raise CheckpointError(f"{path}: trailing bytes")
    return out
