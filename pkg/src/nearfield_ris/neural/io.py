"""Named-tensor checkpoint files.

Layout (little-endian): magic ``NFCK``, uint32 version, uint32 tensor count,
then per tensor: uint32 name length, UTF-8 name, uint32 ndim, ndim x uint64
shape, float64 values in row-major order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"NFCK"
VERSION = 1


def dumps_checkpoint(tensors: dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        raw = name.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<I", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def loads_checkpoint(buf: bytes) -> dict[str, np.ndarray]:
    if buf[:4] != MAGIC:
        raise ValueError("not a checkpoint file")
    version, count = struct.unpack_from("<II", buf, 4)
    if version != VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    off = 12
    out = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", buf, off)
        off += 4
        name = buf[off:off + nlen].decode("utf-8")
        off += nlen
        (ndim,) = struct.unpack_from("<I", buf, off)
        off += 4
        shape = struct.unpack_from(f"<{ndim}Q", buf, off)
        off += 8 * ndim
        n = int(np.prod(shape)) if ndim else 1
        out[name] = np.frombuffer(buf, dtype="<f8", count=n, offset=off).reshape(shape).copy()
        off += 8 * n
    return out


def save_checkpoint(path, tensors: dict[str, np.ndarray]):
    Path(path).write_bytes(dumps_checkpoint(tensors))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    return loads_checkpoint(Path(path).read_bytes())
