"""Minimal FTC1 container writer and validating reader.

Layout (all integers little-endian):

    bytes 0-3   magic "FTC1"
    byte  4     version, currently 1
    byte  5     element type, 1 = f32 little-endian
    byte  6     ndims (1..4)
    byte  7     category (0=CONV, 1=POOL, 2=FC)
    ndims x u32 extents, (H, W, C) order
    u32         metaLen
    metaLen     UTF-8 "network=...\nlayer=...\nsource=..."
    u64         payloadLen, product(dims) * 4
    payloadLen  raw row-major f32le values
    u32         CRC-32 (IEEE) of the payload bytes

This is deliberately standalone so the exporter has no import-time
dependency on the consumer side; the files themselves are the contract.
"""

from __future__ import annotations

import os
import struct
import tempfile
import zlib
from pathlib import Path

import numpy as np

MAGIC = b"FTC1"
VERSION = 1
ELEM_TYPE_F32LE = 1


def container_bytes(
    network: str, layer: str, source_id: str, category: int, values: np.ndarray
) -> bytes:
    """Serialize one feature array; values must already be shaped (H, W, C) or (N,)."""
    if values.size == 0:
        raise ValueError("refusing to write an empty tensor")
    if not 1 <= values.ndim <= 4:
        raise ValueError(f"ndims must be 1..4, got {values.ndim}")
    if category not in (0, 1, 2):
        raise ValueError(f"bad category {category}")
    if not np.all(np.isfinite(values)):
        raise ValueError("payload contains non-finite values")
    payload = np.ascontiguousarray(values, dtype="<f4").tobytes()
    meta = f"network={network}\nlayer={layer}\nsource={source_id}".encode("utf-8")
    parts = [
        struct.pack("<4sBBBB", MAGIC, VERSION, ELEM_TYPE_F32LE, values.ndim, category),
        struct.pack(f"<{values.ndim}I", *values.shape),
        struct.pack("<I", len(meta)),
        meta,
        struct.pack("<Q", len(payload)),
        payload,
        struct.pack("<I", zlib.crc32(payload)),
    ]
    return b"".join(parts)


def write_container_file(
    path: Path, network: str, layer: str, source_id: str, category: int,
    values: np.ndarray,
) -> int:
    """Write atomically: temp file in the same directory, then rename over."""
    blob = container_bytes(network, layer, source_id, category, values)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp_name, path)
    except BaseException:
        os.unlink(tmp_name)
        raise
    return len(blob)


def read_container_file(path: Path) -> dict:
    """Parse and validate a container; returns fields plus the value array.

    Used for post-write verification and in tests. Raises ValueError on
    any structural or integrity problem.
    """
    blob = Path(path).read_bytes()
    view = memoryview(blob)

    def take(count: int, what: str):
        nonlocal view
        if len(view) < count:
            raise ValueError(f"truncated container: missing {what}")
        head, view = view[:count], view[count:]
        return head

    magic, version, elem_type, ndims, category = struct.unpack("<4sBBBB", take(8, "header"))
    if magic != MAGIC:
        raise ValueError(f"bad magic {bytes(magic)!r}")
    if version != VERSION or elem_type != ELEM_TYPE_F32LE:
        raise ValueError(f"unsupported version/element type {version}/{elem_type}")
    if not 1 <= ndims <= 4 or category not in (0, 1, 2):
        raise ValueError(f"bad ndims {ndims} or category {category}")
    dims = struct.unpack(f"<{ndims}I", take(4 * ndims, "extents"))
    (meta_len,) = struct.unpack("<I", take(4, "meta length"))
    meta = {}
    for line in bytes(take(meta_len, "meta")).decode("utf-8").split("\n"):
        key, _, value = line.partition("=")
        meta[key] = value
    (payload_len,) = struct.unpack("<Q", take(8, "payload length"))
    expected = 4 * int(np.prod(dims, dtype=np.int64))
    if payload_len != expected:
        raise ValueError(f"payloadLen {payload_len} != dims product {expected}")
    payload = take(payload_len, "payload")
    (crc,) = struct.unpack("<I", take(4, "checksum"))
    if crc != zlib.crc32(payload):
        raise ValueError("payload CRC mismatch")
    if len(view):
        raise ValueError(f"{len(view)} trailing bytes after container")
    values = np.frombuffer(payload, dtype="<f4").reshape(dims)
    return {
        "network": meta.get("network", ""),
        "layer": meta.get("layer", ""),
        "source": meta.get("source", ""),
        "category": category,
        "dims": dims,
        "values": values,
    }
