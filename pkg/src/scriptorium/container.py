"""Versioned named-array container used for checkpoints and LM tables.

Layout (little-endian): magic `SCRP`, version u32, then repeated records
of {name_length u32, name utf-8, rank u32, dims u32 x rank, float64
payload}. Reading stops at a clean end of file; anything else is corrupt.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .errors import CorruptFile

MAGIC = b"SCRP"
VERSION = 1

_MAX_NAME = 1 << 16
_MAX_RANK = 32


def write_arrays(path: str | Path, arrays: dict[str, np.ndarray]) -> None:
    """Write named float64 arrays; records appear in dict order."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", VERSION))
        for name, arr in arrays.items():
            arr = np.asarray(arr, dtype=np.float64)
            if not arr.flags["C_CONTIGUOUS"]:  # ascontiguousarray would promote 0-d
                arr = np.ascontiguousarray(arr)
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            for dim in arr.shape:
                fh.write(struct.pack("<I", dim))
            fh.write(arr.tobytes())


def read_arrays(path: str | Path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    if len(data) < 8 or data[:4] != MAGIC:
        raise CorruptFile(f"{path}: bad magic")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != VERSION:
        raise CorruptFile(f"{path}: unsupported version {version} (expected {VERSION})")
    arrays: dict[str, np.ndarray] = {}
    offset = 8
    while offset < len(data):
        offset, name, arr = _read_record(data, offset, path)
        if name in arrays:
            raise CorruptFile(f"{path}: duplicate record {name!r}")
        arrays[name] = arr
    return arrays


def _read_record(data: bytes, offset: int, path) -> tuple[int, str, np.ndarray]:
    def take(count: int) -> bytes:
        nonlocal offset
        if offset + count > len(data):
            raise CorruptFile(f"{path}: truncated record at byte {offset}")
        chunk = data[offset:offset + count]
        offset += count
        return chunk

    (name_len,) = struct.unpack("<I", take(4))
    if name_len == 0 or name_len > _MAX_NAME:
        raise CorruptFile(f"{path}: implausible name length {name_len}")
    try:
        name = take(name_len).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorruptFile(f"{path}: undecodable record name") from exc
    (rank,) = struct.unpack("<I", take(4))
    if rank > _MAX_RANK:
        raise CorruptFile(f"{path}: implausible rank {rank}")
    dims = struct.unpack(f"<{rank}I", take(4 * rank)) if rank else ()
    count = 1
    for dim in dims:
        count *= dim
    payload = take(8 * count)
    arr = np.frombuffer(payload, dtype="<f8").reshape(dims).copy()
    return offset, name, arr
