"""Bit-exact binary checkpoint of named tensors.

Layout (all integers little-endian):
    magic "STSC" | u32 version=1 | u32 entry count
    per entry: u32 name length | UTF-8 name | u8 dtype (1=f32, 2=f64)
               | u8 rank | rank x u64 dims | raw little-endian data

Data is row-major. Round trips are bitwise exact.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"STSC"
VERSION = 1

_DTYPE_CODES = {np.dtype("<f4"): 1, np.dtype("<f8"): 2}
_CODE_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}


class CheckpointError(ValueError):
    """Malformed checkpoint file or invalid entry set."""


class Checkpoint:
    """Ordered name -> array container with binary save/load."""

    def __init__(self, entries: dict[str, np.ndarray] | None = None, format_version: int = VERSION):
        self.format_version = format_version
        self.entries: dict[str, np.ndarray] = {}
        for name, arr in (entries or {}).items():
            self[name] = arr

    def __setitem__(self, name: str, arr: np.ndarray) -> None:
        arr = np.asarray(arr)
        if arr.dtype.newbyteorder("<") not in _DTYPE_CODES:
            raise CheckpointError(f"unsupported dtype {arr.dtype} for entry {name!r}")
        self.entries[name] = arr

    def __getitem__(self, name: str) -> np.ndarray:
        return self.entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Checkpoint):
            return NotImplemented
        if list(self.entries) != list(other.entries):
            return False
        return all(
            a.dtype == b.dtype and a.shape == b.shape and np.array_equal(a, b, equal_nan=True)
            for a, b in ((self.entries[k], other.entries[k]) for k in self.entries)
        )


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(ckpt.entries)))
        for name, arr in ckpt.entries.items():
            raw = name.encode("utf-8")
            arr_le = np.ascontiguousarray(arr, dtype=arr.dtype.newbyteorder("<"))
            f.write(struct.pack("<I", len(raw)))
            f.write(raw)
            f.write(struct.pack("<BB", _DTYPE_CODES[arr_le.dtype], arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            f.write(arr_le.tobytes())


def load_checkpoint(path: str | Path) -> Checkpoint:
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != MAGIC:
        raise CheckpointError(f"bad magic {data[:4]!r}")
    if len(data) < 12:
        raise CheckpointError("truncated header")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise CheckpointError(f"unsupported format version {version}")
    pos = 12
    ckpt = Checkpoint()
    for _ in range(count):
        try:
            (name_len,) = struct.unpack_from("<I", data, pos)
            pos += 4
            if len(data) < pos + name_len:
                raise struct.error("short name")
            name = data[pos : pos + name_len].decode("utf-8")
            pos += name_len
            code, rank = struct.unpack_from("<BB", data, pos)
            pos += 2
            dims = struct.unpack_from(f"<{rank}Q", data, pos)
            pos += 8 * rank
        except struct.error as e:
            raise CheckpointError(f"truncated entry header: {e}") from e
        if code not in _CODE_DTYPES:
            raise CheckpointError(f"unknown dtype code {code} for entry {name!r}")
        if name in ckpt:
            raise CheckpointError(f"duplicate entry name {name!r}")
        dtype = _CODE_DTYPES[code]
        size = 1
        for d in dims:
            size *= d
        nbytes = dtype.itemsize * size
        if len(data) < pos + nbytes:
            raise CheckpointError(f"truncated data for entry {name!r}")
        arr = np.frombuffer(data[pos : pos + nbytes], dtype=dtype).reshape(dims).copy()
        pos += nbytes
        ckpt[name] = arr
    if pos != len(data):
        raise CheckpointError(f"{len(data) - pos} trailing bytes after last entry")
    return ckpt
