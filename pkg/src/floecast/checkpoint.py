"""Bit-exact named-tensor checkpoint container.

Binary layout (little-endian):

    magic  b"FCKP"  |  u32 version=1  |  u32 tensor count
    per tensor:
        u16 name length | name utf-8
        u8  dtype code (0=float32, 1=float64, 2=int64, 3=uint8)
        u8  ndim | u32 x ndim dims
        u64 payload bytes | u32 crc32(payload) | payload (C order)

CRCs are verified on load; a mismatch raises CheckpointError naming the
tensor.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

MAGIC = b"FCKP"
VERSION = 1

_DTYPE_CODES: dict[str, int] = {"float32": 0, "float64": 1, "int64": 2, "uint8": 3}
_CODE_DTYPES = {v: np.dtype(k) for k, v in _DTYPE_CODES.items()}


class CheckpointError(RuntimeError):
    """Raised when a checkpoint file is malformed or corrupt."""


def save_tensors(path: str | Path, tensors: dict[str, np.ndarray]) -> None:
    """Write named arrays in insertion order; round-trips bit-exactly."""
    chunks: list[bytes] = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, arr in tensors.items():
        arr = np.ascontiguousarray(arr)
        if arr.dtype.name not in _DTYPE_CODES:
            raise CheckpointError(f"tensor {name!r} has unsupported dtype {arr.dtype}")
        raw = arr.tobytes()
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise CheckpointError(f"tensor name too long: {name[:32]!r}...")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<BB", _DTYPE_CODES[arr.dtype.name], arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(struct.pack("<QI", len(raw), zlib.crc32(raw) & 0xFFFFFFFF))
        chunks.append(raw)
    Path(path).write_bytes(b"".join(chunks))


class _Reader:
    def __init__(self, blob: bytes, path: Path):
        self.blob = blob
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CheckpointError(f"{self.path}: truncated checkpoint")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_tensors(path: str | Path) -> dict[str, np.ndarray]:
    """Read a checkpoint, verifying per-tensor CRC32s."""
    path = Path(path)
    reader = _Reader(path.read_bytes(), path)
    if reader.take(4) != MAGIC:
        raise CheckpointError(f"{path}: bad magic, not a checkpoint file")
    version, count = reader.unpack("<II")
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = reader.unpack("<H")
        name = reader.take(name_len).decode("utf-8")
        code, ndim = reader.unpack("<BB")
        if code not in _CODE_DTYPES:
            raise CheckpointError(f"{path}: tensor {name!r} has unknown dtype code {code}")
        shape = reader.unpack(f"<{ndim}I")
        nbytes, crc = reader.unpack("<QI")
        raw = reader.take(nbytes)
        if zlib.crc32(raw) & 0xFFFFFFFF != crc:
            raise CheckpointError(f"{path}: CRC mismatch for tensor {name!r}")
        dtype = _CODE_DTYPES[code]
        expected = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        if expected != nbytes:
            raise CheckpointError(
                f"{path}: tensor {name!r} payload is {nbytes} bytes, "
                f"shape {shape} implies {expected}"
            )
        out[name] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
    if reader.pos != len(reader.blob):
        raise CheckpointError(f"{path}: trailing bytes after last tensor")
    return out
