"""Single-file tensor checkpoint.

Layout: magic ``DSEG``, one version byte, then records until EOF. Each record is
  u16  name length (little endian)
  ...  UTF-8 name
  u8   rank
  u32  dim[0..rank)           (little endian)
  f32  payload, prod(dims) values, little endian, row-major

A JSON metadata dict rides along as a reserved record (``meta/json``) whose
payload stores the UTF-8 bytes one-per-float; byte values are exact in f32.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from choreoseg.errors import FormatError

MAGIC = b"DSEG"
VERSION = 1
META_RECORD = "meta/json"


def _write_record(fh, name: str, arr: np.ndarray) -> None:
    data = np.asarray(arr, dtype="<f4")  # tobytes() emits C order regardless of layout
    nb = name.encode("utf-8")
    fh.write(struct.pack("<H", len(nb)))
    fh.write(nb)
    fh.write(struct.pack("<B", data.ndim))
    for d in data.shape:
        fh.write(struct.pack("<I", d))
    fh.write(data.tobytes())


def save_checkpoint(path, tensors: dict, meta: dict | None = None) -> None:
    """Write named arrays (and optional JSON metadata) to `path`, sorted by name."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<B", VERSION))
        if meta is not None:
            raw = np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)
            _write_record(fh, META_RECORD, raw.astype(np.float32))
        for name in sorted(tensors):
            if name == META_RECORD:
                raise FormatError(f"tensor name {META_RECORD!r} is reserved")
            _write_record(fh, name, tensors[name])


def _read_exact(fh, n: int) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError("truncated checkpoint record")
    return buf


def load_checkpoint(path) -> tuple[dict, dict | None]:
    """Read back (tensors, meta). Arrays come out as float32."""
    path = Path(path)
    tensors: dict = {}
    meta = None
    with open(path, "rb") as fh:
        if fh.read(4) != MAGIC:
            raise FormatError(f"{path}: bad magic, not a checkpoint")
        (version,) = struct.unpack("<B", _read_exact(fh, 1))
        if version != VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version {version}")
        while True:
            head = fh.read(2)
            if not head:
                break
            if len(head) != 2:
                raise FormatError("truncated checkpoint record")
            (name_len,) = struct.unpack("<H", head)
            name = _read_exact(fh, name_len).decode("utf-8")
            (rank,) = struct.unpack("<B", _read_exact(fh, 1))
            dims = tuple(struct.unpack("<I", _read_exact(fh, 4))[0] for _ in range(rank))
            count = int(np.prod(dims, dtype=np.int64)) if rank else 1
            payload = np.frombuffer(_read_exact(fh, 4 * count), dtype="<f4").reshape(dims)
            if name == META_RECORD:
                meta = json.loads(payload.astype(np.uint8).tobytes().decode("utf-8"))
            else:
                tensors[name] = payload.copy()
    return tensors, meta
