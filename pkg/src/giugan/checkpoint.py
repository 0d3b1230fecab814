"""Versioned container for named arrays plus a JSON manifest.

Layout (all integers little-endian)::

    magic      8 bytes  b"GIUCKPT\\0"
    version    u32
    manifest   u64 length + UTF-8 JSON
    count      u32
    per array:
      name     u16 length + UTF-8
      dtype    u8 length + ASCII tag ("f8", "i8", "u1", ...)
      ndim     u8, then ndim x u64 extents
      payload  u64 byte length + raw little-endian data (C order)
"""

from __future__ import annotations

import io
import json
import os
import struct
from pathlib import Path
from typing import Any, Union

import numpy as np

MAGIC = b"GIUCKPT\0"
VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(
    path: Union[str, Path], arrays: dict[str, np.ndarray], manifest: dict[str, Any]
) -> Path:
    path = Path(path)
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<I", VERSION))
    meta = json.dumps(manifest, sort_keys=True).encode("utf-8")
    buf.write(struct.pack("<Q", len(meta)))
    buf.write(meta)
    buf.write(struct.pack("<I", len(arrays)))
    for name, arr in arrays.items():
        arr = np.asarray(arr, order="C")  # ascontiguousarray would promote 0-d to 1-d
        le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
        tag = f"{le.dtype.kind}{le.dtype.itemsize}".encode("ascii")
        raw_name = name.encode("utf-8")
        buf.write(struct.pack("<H", len(raw_name)))
        buf.write(raw_name)
        buf.write(struct.pack("<B", len(tag)))
        buf.write(tag)
        buf.write(struct.pack("<B", le.ndim))
        buf.write(struct.pack(f"<{le.ndim}Q", *le.shape))
        payload = le.tobytes()
        buf.write(struct.pack("<Q", len(payload)))
        buf.write(payload)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(buf.getvalue())
    os.replace(tmp, path)
    return path


def _read(f, n: int) -> bytes:
    data = f.read(n)
    if len(data) != n:
        raise CheckpointError("truncated checkpoint")
    return data


def load_checkpoint(path: Union[str, Path]) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    with open(path, "rb") as f:
        if _read(f, 8) != MAGIC:
            raise CheckpointError(f"{path} is not a checkpoint file")
        (version,) = struct.unpack("<I", _read(f, 4))
        if version != VERSION:
            raise CheckpointError(f"checkpoint version {version} is not supported (expected {VERSION})")
        (mlen,) = struct.unpack("<Q", _read(f, 8))
        manifest = json.loads(_read(f, mlen).decode("utf-8"))
        (count,) = struct.unpack("<I", _read(f, 4))
        arrays = {}
        for _ in range(count):
            (nlen,) = struct.unpack("<H", _read(f, 2))
            name = _read(f, nlen).decode("utf-8")
            (tlen,) = struct.unpack("<B", _read(f, 1))
            tag = _read(f, tlen).decode("ascii")
            (ndim,) = struct.unpack("<B", _read(f, 1))
            shape = struct.unpack(f"<{ndim}Q", _read(f, 8 * ndim)) if ndim else ()
            (nbytes,) = struct.unpack("<Q", _read(f, 8))
            dtype = np.dtype("<" + tag)
            arr = np.frombuffer(_read(f, nbytes), dtype=dtype).reshape(shape)
            arrays[name] = arr.astype(dtype.newbyteorder("="))
        return arrays, manifest
