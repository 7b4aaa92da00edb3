"""Flat binary parameter checkpoints.

Layout: magic bytes ``KGS1``, then for each parameter (sorted by name)
``{u32 name length, utf-8 name, u32 rank, u32 dims..., float64 LE payload}``.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import DataError
from .tensor import Tensor

MAGIC = b"KGS1"


def save_params(path, params):
    """Write a name -> Tensor/ndarray mapping to ``path``."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        for name in sorted(params):
            arr = params[name]
            if isinstance(arr, Tensor):
                arr = arr.values
            arr = np.ascontiguousarray(arr, dtype="<f8")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<I", arr.ndim))
            if arr.ndim:
                f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def load_params(path):
    """Read a checkpoint back as a name -> float64 ndarray mapping."""
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:4] != MAGIC:
        raise DataError(f"{path}: bad checkpoint magic {blob[:4]!r}")
    params = {}
    off = 4
    total = len(blob)

    def take(n, what):
        nonlocal off
        if off + n > total:
            raise DataError(f"{path}: truncated checkpoint while reading {what}")
        piece = blob[off:off + n]
        off += n
        return piece

    while off < total:
        (name_len,) = struct.unpack("<I", take(4, "name length"))
        name = take(name_len, "name").decode("utf-8")
        (rank,) = struct.unpack("<I", take(4, "rank"))
        dims = struct.unpack(f"<{rank}I", take(4 * rank, "dims")) if rank else ()
        count = int(np.prod(dims)) if rank else 1
        payload = take(8 * count, f"payload of {name!r}")
        arr = np.frombuffer(payload, dtype="<f8").astype(np.float64)
        params[name] = arr.reshape(dims)
    return params
