"""APLMAT1 matrix files: magic, rows, cols (u64 LE), row-major f32 LE."""
from __future__ import annotations

import os
import struct

import numpy as np

MAGIC = b"APLMAT1"
_HEADER = struct.Struct("<QQ")


class MatrixFormatError(ValueError):
    pass


def write_matrix(path: str | os.PathLike, mat) -> None:
    mat = np.asarray(mat)
    if mat.ndim != 2:
        raise MatrixFormatError(f"expected a 2-D matrix, got shape {mat.shape}")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(_HEADER.pack(*mat.shape))
        f.write(np.ascontiguousarray(mat, dtype="<f4").tobytes())


def read_matrix(path: str | os.PathLike) -> np.ndarray:
    with open(path, "rb") as f:
        blob = f.read()
    if not blob.startswith(MAGIC):
        raise MatrixFormatError(f"{path}: bad magic")
    off = len(MAGIC)
    if len(blob) < off + _HEADER.size:
        raise MatrixFormatError(f"{path}: truncated header")
    rows, cols = _HEADER.unpack_from(blob, off)
    off += _HEADER.size
    need = rows * cols * 4
    if len(blob) - off != need:
        raise MatrixFormatError(f"{path}: expected {need} payload bytes, found {len(blob) - off}")
    return np.frombuffer(blob, dtype="<f4", offset=off).reshape(rows, cols).astype(np.float32)
