"""FTC1 raw-tensor container format.

Layout (all integers little-endian):

    bytes 0-3   magic "FTC1"
    byte  4     version, currently 1
    byte  5     element type, 1 = f32 little-endian
    byte  6     ndims (1..4)
    byte  7     category (0=CONV, 1=POOL, 2=FC)
    ndims x u32 extents, (H, W, C) order
    u32         metaLen
    metaLen     UTF-8 text, newline-separated key=value lines
                (keys: network, layer, source)
    u64         payloadLen, must equal product(dims) * 4
    payloadLen  raw row-major f32le values
    u32         CRC-32 (IEEE) of the payload bytes

Writes are deterministic; a read recovers the tensor bit-exactly.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .errors import CorruptionError, FormatError, ValidationError
from .tensor import Category, FeatureMeta, FeatureTensor

__all__ = [
    "MAGIC",
    "write_container",
    "read_container",
    "save_container",
    "load_container",
    "peek_container",
]

MAGIC = b"FTC1"
VERSION = 1
ELEM_TYPE_F32LE = 1


def _meta_text(meta: FeatureMeta) -> bytes:
    lines = f"network={meta.network}\nlayer={meta.layer}\nsource={meta.source_id}"
    return lines.encode("utf-8")


def _parse_meta(blob: bytes, category: Category) -> FeatureMeta:
    try:
        text = blob.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorruptionError(f"meta text is not valid UTF-8: {exc}") from exc
    fields = {}
    for line in text.split("\n"):
        if "=" not in line:
            raise CorruptionError(f"malformed meta line {line!r}")
        key, value = line.split("=", 1)
        fields[key] = value
    try:
        return FeatureMeta(
            network=fields["network"],
            layer=fields["layer"],
            category=category,
            source_id=fields["source"],
        )
    except KeyError as exc:
        raise CorruptionError(f"meta is missing required key {exc}") from exc


def write_container(t: FeatureTensor, sink: BinaryIO) -> int:
    """Serialize a tensor to ``sink``. Returns the byte count written."""
    t.validate()
    meta = _meta_text(t.meta)
    payload = t.payload_bytes()
    ndims = len(t.dims)
    parts = [
        struct.pack("<4sBBBB", MAGIC, VERSION, ELEM_TYPE_F32LE, ndims, int(t.meta.category)),
        struct.pack(f"<{ndims}I", *t.dims),
        struct.pack("<I", len(meta)),
        meta,
        struct.pack("<Q", len(payload)),
        payload,
        struct.pack("<I", zlib.crc32(payload)),
    ]
    blob = b"".join(parts)
    sink.write(blob)
    return len(blob)


def _read_exact(source: BinaryIO, count: int, what: str) -> bytes:
    data = source.read(count)
    if len(data) != count:
        raise CorruptionError(f"truncated container: expected {count} bytes of {what}")
    return data


def _read_prelude(source: BinaryIO) -> tuple[Category, tuple[int, ...], FeatureMeta]:
    magic, version, elem_type, ndims, cat_byte = struct.unpack(
        "<4sBBBB", _read_exact(source, 8, "header")
    )
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}")
    if elem_type != ELEM_TYPE_F32LE:
        raise FormatError(f"unsupported element type {elem_type}")
    if not 1 <= ndims <= 4:
        raise FormatError(f"ndims must be 1..4, got {ndims}")
    try:
        category = Category(cat_byte)
    except ValueError:
        raise FormatError(f"unknown category byte {cat_byte}") from None
    dims = struct.unpack(f"<{ndims}I", _read_exact(source, 4 * ndims, "extents"))
    if any(d == 0 for d in dims):
        raise ValidationError(f"extents must be positive, got {dims}")
    (meta_len,) = struct.unpack("<I", _read_exact(source, 4, "meta length"))
    meta = _parse_meta(_read_exact(source, meta_len, "meta"), category)
    return category, dims, meta


def read_container(source: BinaryIO) -> FeatureTensor:
    """Parse one FTC1 stream from ``source``.

    Reads exactly the declared length; unrelated bytes after the stream are
    left in the source untouched.
    """
    _category, dims, meta = _read_prelude(source)
    (payload_len,) = struct.unpack("<Q", _read_exact(source, 8, "payload length"))
    expected = int(np.prod(dims, dtype=np.uint64)) * 4
    if payload_len != expected:
        raise CorruptionError(
            f"payload length {payload_len} does not match dims {dims} (expected {expected})"
        )
    payload = _read_exact(source, payload_len, "payload")
    (crc,) = struct.unpack("<I", _read_exact(source, 4, "checksum"))
    if crc != zlib.crc32(payload):
        raise CorruptionError("payload CRC mismatch")
    values = np.frombuffer(payload, dtype="<f4").copy()
    if not np.isfinite(values).all():
        raise ValidationError("container holds non-finite values")
    t = FeatureTensor(dims=dims, values=values, meta=meta)
    t.validate()
    return t


def peek_container(source: BinaryIO) -> tuple[FeatureMeta, tuple[int, ...]]:
    """Read meta and extents only, skipping past the payload.

    Useful for indexing a store of containers without loading the values.
    """
    _category, dims, meta = _read_prelude(source)
    (payload_len,) = struct.unpack("<Q", _read_exact(source, 8, "payload length"))
    source.seek(payload_len + 4, 1)
    return meta, dims


def save_container(t: FeatureTensor, path: str | Path) -> int:
    with open(path, "wb") as fh:
        return write_container(t, fh)


def load_container(path: str | Path) -> FeatureTensor:
    with open(path, "rb") as fh:
        return read_container(fh)
