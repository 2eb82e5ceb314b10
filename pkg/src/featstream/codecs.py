"""Pluggable compression backends and the sparsity-aware zero-mask codec.

Four generic lossless backends emit the standard gzip (RFC 1952), zlib
(RFC 1950), bzip2, and legacy ".lzma" byte formats, so their output is
interchangeable with the usual command-line tools. The zero-mask codec is
feature-aware: it splits an f32 payload into a per-element presence bitmask
plus the packed nonzero values, then runs a generic backend (or nothing)
over each part. ReLU activations are mostly zeros, which is exactly the
redundancy this split removes up front.

All functions are pure; there is no shared codec state.
"""

from __future__ import annotations

import bz2
import lzma
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import CorruptionError, FormatError
from .tensor import FeatureMeta, FeatureTensor

__all__ = [
    "CodecId",
    "CodecParams",
    "STORE",
    "DEFLATE_GZ",
    "DEFLATE_Z",
    "BZ2",
    "LZMA1",
    "zeromask",
    "LOSSLESS_BACKENDS",
    "ALL_CODECS",
    "codec_to_byte",
    "codec_from_byte",
    "parse_codec",
    "compress_payload",
    "decompress_payload",
    "zero_mask_encode",
    "zero_mask_decode",
    "ZEROMASK_FRAMING_BYTES",
]

_NAMES = ("store", "gzip", "zlib", "bz2", "lzma", "zeromask")


@dataclass(frozen=True)
class CodecId:
    """Identifies one compression backend.

    ``zeromask`` wraps an inner backend (or ``store`` for no inner
    compression); nesting zeromask inside zeromask is rejected. ``store``
    is only valid as a zeromask inner.
    """

    name: str
    inner: "CodecId | None" = None

    def __post_init__(self):
        if self.name not in _NAMES:
            raise ValueError(f"unknown codec name {self.name!r}")
        if self.name == "zeromask":
            if self.inner is None:
                raise ValueError("zeromask requires an inner codec (use STORE for none)")
            if self.inner.name == "zeromask":
                raise ValueError("zeromask may not nest another zeromask")
        elif self.inner is not None:
            raise ValueError(f"codec {self.name!r} takes no inner codec")

    def __str__(self) -> str:
        if self.name == "zeromask":
            return "zeromask" if self.inner.name == "store" else f"zeromask+{self.inner.name}"
        return self.name


STORE = CodecId("store")
DEFLATE_GZ = CodecId("gzip")
DEFLATE_Z = CodecId("zlib")
BZ2 = CodecId("bz2")
LZMA1 = CodecId("lzma")


def zeromask(inner: CodecId = STORE) -> CodecId:
    return CodecId("zeromask", inner)


LOSSLESS_BACKENDS = (DEFLATE_GZ, DEFLATE_Z, BZ2, LZMA1)
ALL_CODECS = LOSSLESS_BACKENDS + tuple(zeromask(c) for c in (STORE,) + LOSSLESS_BACKENDS)

_BASE_BYTE = {"gzip": 1, "zlib": 2, "bz2": 3, "lzma": 4}
_BYTE_BASE = {v: k for k, v in _BASE_BYTE.items()}
_ZM_FLAG = 0x10

# Canonical default effort levels of the reference implementations.
_DEFAULT_LEVEL = {"gzip": 6, "zlib": 6, "bz2": 9, "lzma": 6}
_LEVEL_RANGE = {"gzip": (0, 9), "zlib": (0, 9), "bz2": (1, 9), "lzma": (0, 9)}


def codec_to_byte(codec: CodecId) -> int:
    """Single-byte wire encoding: backends 1..4, zeromask 0x10 | inner."""
    if codec.name == "zeromask":
        inner = 0 if codec.inner.name == "store" else _BASE_BYTE[codec.inner.name]
        return _ZM_FLAG | inner
    if codec.name == "store":
        raise ValueError("store has no standalone wire encoding")
    return _BASE_BYTE[codec.name]


def codec_from_byte(value: int) -> CodecId:
    if value in _BYTE_BASE:
        return CodecId(_BYTE_BASE[value])
    if value & _ZM_FLAG and not value & ~0x1F:
        inner = value & 0x0F
        if inner == 0:
            return zeromask(STORE)
        if inner in _BYTE_BASE:
            return zeromask(CodecId(_BYTE_BASE[inner]))
    raise FormatError(f"unknown codec byte 0x{value:02x}")


def parse_codec(name: str) -> CodecId:
    """Parse a codec spelling: "gzip", "bz2", "zeromask", "zeromask+lzma", ..."""
    name = name.strip().lower()
    if name == "zeromask":
        return zeromask(STORE)
    if name.startswith("zeromask+"):
        inner = name[len("zeromask+") :]
        if inner == "store":
            return zeromask(STORE)
        if inner in _BASE_BYTE:
            return zeromask(CodecId(inner))
        raise ValueError(f"unknown zeromask inner codec {inner!r}")
    if name in _BASE_BYTE:
        return CodecId(name)
    raise ValueError(f"unknown codec {name!r}")


@dataclass(frozen=True)
class CodecParams:
    """Backend effort level; None means the backend's canonical default
    (6 for the DEFLATE family, 9 for bz2, preset 6 for lzma).
    ``inner`` configures the zeromask inner codec."""

    level: int | None = None
    inner: "CodecParams | None" = None


def effective_level(codec: CodecId, params: CodecParams) -> int:
    level = params.level if params.level is not None else _DEFAULT_LEVEL[codec.name]
    lo, hi = _LEVEL_RANGE[codec.name]
    if not lo <= level <= hi:
        raise ValueError(f"{codec.name} level must be in [{lo}, {hi}], got {level}")
    return level


def _compress_backend(raw: bytes, codec: CodecId, level: int) -> bytes:
    if codec.name == "gzip":
        # compressobj with wbits 31 writes a gzip container with mtime=0,
        # keeping the output deterministic (gzip.compress stamps the clock).
        co = zlib.compressobj(level, zlib.DEFLATED, 16 + zlib.MAX_WBITS)
        return co.compress(raw) + co.flush()
    if codec.name == "zlib":
        return zlib.compress(raw, level)
    if codec.name == "bz2":
        return bz2.compress(raw, level)
    if codec.name == "lzma":
        return lzma.compress(raw, format=lzma.FORMAT_ALONE, preset=level)
    raise ValueError(f"unsupported codec {codec}")


def _decompress_backend(compressed: bytes, codec: CodecId) -> bytes:
    if codec.name == "gzip":
        obj = zlib.decompressobj(16 + zlib.MAX_WBITS)
    elif codec.name == "zlib":
        obj = zlib.decompressobj(zlib.MAX_WBITS)
    elif codec.name == "bz2":
        obj = bz2.BZ2Decompressor()
    elif codec.name == "lzma":
        obj = lzma.LZMADecompressor(format=lzma.FORMAT_ALONE)
    else:
        raise ValueError(f"unsupported codec {codec}")
    try:
        out = obj.decompress(compressed)
    except (zlib.error, lzma.LZMAError, OSError, EOFError) as exc:
        raise CorruptionError(f"{codec.name} stream is corrupt: {exc}") from exc
    if not obj.eof:
        raise CorruptionError(f"{codec.name} stream is truncated")
    unused = obj.unused_data
    if unused:
        raise CorruptionError(f"{codec.name} stream has {len(unused)} trailing bytes")
    return out


def compress_payload(raw: bytes, codec: CodecId, params: CodecParams | None = None) -> bytes:
    """Compress a byte payload with the named codec.

    The backend outputs are the standard container formats, decodable by
    reference tools; zeromask output uses the framed layout described in
    ``_zeromask_compress``. Raw must be non-empty.
    """
    if not raw:
        raise ValueError("raw payload must be non-empty")
    params = params or CodecParams()
    if codec.name == "zeromask":
        return _zeromask_compress(raw, codec.inner, params.inner or CodecParams())
    if codec.name == "store":
        raise ValueError("store is only valid as a zeromask inner codec")
    return _compress_backend(raw, codec, effective_level(codec, params))


def decompress_payload(compressed: bytes, codec: CodecId) -> bytes:
    """Exact inverse of compress_payload for the same codec id."""
    if not compressed:
        raise CorruptionError("empty compressed stream")
    if codec.name == "zeromask":
        return _zeromask_decompress(compressed, codec.inner)
    if codec.name == "store":
        raise ValueError("store is only valid as a zeromask inner codec")
    return _decompress_backend(compressed, codec)


# --- zero-mask codec -------------------------------------------------------
#
# Framed payload layout (little-endian):
#
#     u64 rawLen    original payload byte length
#     u64 nnz       number of nonzero 4-byte elements
#     u64 maskLen   byte length of the (inner-compressed) mask segment
#     maskLen bytes mask, one bit per element, LSB-first within each byte
#     u64 nzLen     byte length of the (inner-compressed) value segment
#     nzLen bytes   nonzero elements in order, then any trailing rawLen%4 bytes
#
# An element is nonzero when its 32-bit pattern is nonzero, so payloads
# round-trip bit-exactly (a float -0.0 is kept verbatim). Empty segments are
# stored as zero-length without invoking the inner codec.

ZEROMASK_FRAMING_BYTES = 32


def _seg_compress(data: bytes, inner: CodecId, params: CodecParams) -> bytes:
    if not data or inner.name == "store":
        return data
    return _compress_backend(data, inner, effective_level(inner, params))


def _seg_decompress(data: bytes, inner: CodecId) -> bytes:
    if not data or inner.name == "store":
        return data
    return _decompress_backend(data, inner)


def _split_words(raw: bytes) -> tuple[int, np.ndarray, bytes]:
    n = len(raw) // 4
    words = np.frombuffer(raw[: n * 4], dtype="<u4")
    return n, words, raw[n * 4 :]


def _zeromask_compress(raw: bytes, inner: CodecId, params: CodecParams) -> bytes:
    n, words, tail = _split_words(raw)
    present = words != 0
    mask = np.packbits(present, bitorder="little").tobytes() if n else b""
    nonzeros = words[present].tobytes() + tail
    nnz = int(present.sum())
    seg_mask = _seg_compress(mask, inner, params)
    seg_nz = _seg_compress(nonzeros, inner, params)
    return b"".join(
        [
            struct.pack("<QQ", len(raw), nnz),
            struct.pack("<Q", len(seg_mask)),
            seg_mask,
            struct.pack("<Q", len(seg_nz)),
            seg_nz,
        ]
    )


def _take(buf: memoryview, count: int, what: str) -> tuple[memoryview, memoryview]:
    if len(buf) < count:
        raise CorruptionError(f"zeromask payload truncated reading {what}")
    return buf[:count], buf[count:]


def _zeromask_decompress(payload: bytes, inner: CodecId) -> bytes:
    buf = memoryview(payload)
    head, buf = _take(buf, 16, "lengths")
    raw_len, nnz = struct.unpack("<QQ", head)
    head, buf = _take(buf, 8, "mask length")
    seg_mask, buf = _take(buf, struct.unpack("<Q", head)[0], "mask segment")
    head, buf = _take(buf, 8, "value length")
    seg_nz, buf = _take(buf, struct.unpack("<Q", head)[0], "value segment")
    if len(buf):
        raise CorruptionError(f"zeromask payload has {len(buf)} trailing bytes")

    mask = _seg_decompress(bytes(seg_mask), inner)
    nonzeros = _seg_decompress(bytes(seg_nz), inner)

    n, tail_len = divmod(raw_len, 4)
    if len(mask) != (n + 7) // 8:
        raise CorruptionError(f"mask is {len(mask)} bytes, expected {(n + 7) // 8}")
    if n:
        bits = np.unpackbits(np.frombuffer(mask, dtype=np.uint8), bitorder="little")
        present = bits[:n].astype(bool)
        if bits[n:].any():
            raise CorruptionError("mask padding bits are set")
        count = int(present.sum())
    else:
        present = np.zeros(0, dtype=bool)
        count = 0
    if count != nnz:
        raise CorruptionError(f"mask popcount {count} != declared nonzero count {nnz}")
    if len(nonzeros) != 4 * nnz + tail_len:
        raise CorruptionError(
            f"value segment is {len(nonzeros)} bytes, expected {4 * nnz + tail_len}"
        )
    words = np.zeros(n, dtype="<u4")
    words[present] = np.frombuffer(nonzeros[: 4 * nnz], dtype="<u4")
    return words.tobytes() + nonzeros[4 * nnz :]


def zero_mask_encode(t: FeatureTensor) -> tuple[bytes, bytes]:
    """Split a tensor into (presence bitmask, packed nonzero values).

    The mask holds one bit per element in flattening order, LSB-first within
    each byte, set when the element's 32-bit pattern is nonzero; the second
    part is the f32le concatenation of those elements in order. Sizes are
    ceil(n/8) and 4*nnz bytes.
    """
    present = t.values.view("<u4") != 0
    mask = np.packbits(present, bitorder="little").tobytes()
    return mask, t.values[present].tobytes()


def zero_mask_decode(
    mask: bytes, nonzeros: bytes, dims, meta: FeatureMeta | None = None
) -> FeatureTensor:
    """Exact inverse of zero_mask_encode for the given extents.

    The mask may carry padding bits past product(dims); they must be zero.
    """
    from .tensor import Category  # local import to avoid cycle at module load

    dims = tuple(int(d) for d in dims)
    n = int(np.prod(dims, dtype=np.int64))
    if len(mask) * 8 < n:
        raise CorruptionError(f"mask has {len(mask) * 8} bits, need {n}")
    bits = np.unpackbits(np.frombuffer(mask, dtype=np.uint8), bitorder="little")
    present = bits[:n].astype(bool)
    if bits[n:].any():
        raise CorruptionError("mask padding bits are set")
    count = int(present.sum())
    if count * 4 != len(nonzeros):
        raise CorruptionError(
            f"popcount {count} implies {count * 4} value bytes, got {len(nonzeros)}"
        )
    values = np.zeros(n, dtype="<f4")
    values[present] = np.frombuffer(nonzeros, dtype="<f4")
    if meta is None:
        category = Category.FC if len(dims) == 1 else Category.CONV
        meta = FeatureMeta(network="", layer="", category=category)
    return FeatureTensor(dims=dims, values=values, meta=meta)
