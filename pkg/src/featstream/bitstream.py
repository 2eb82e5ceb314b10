"""FDF1 compressed-feature frame format.

One frame carries one compressed feature tensor plus everything needed to
reconstruct it: codec identity, tensor shape and category, provenance
meta, optional quantization grid, and a checksum over the compressed
payload that is verified before any decode work happens.

Layout (all integers little-endian):

    bytes 0-3   magic "FDF1"
    byte  4     version, currently 1
    byte  5     codec id
    byte  6     mode, 0 = LOSSLESS, 1 = QUANTIZED
    byte  7     category (0=CONV, 1=POOL, 2=FC)
    byte  8     ndims (1..4)
    ndims x u32 extents, (H, W, C) order
    [QUANTIZED only:  u8 bits, f32 minVal, f32 maxVal]
    u64         originalLen, always product(extents) * 4
    u64         compressedLen
    u32         CRC-32 (IEEE) of the compressed payload
    u16         metaLen
    metaLen     UTF-8 key=value meta lines (network, layer, source)
    compressedLen  codec payload

The header is everything before the payload: 31 + 4*ndims + metaLen
bytes, plus 9 when quantized.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from enum import IntEnum
from typing import BinaryIO

import numpy as np

from .codecs import (
    CodecId,
    CodecParams,
    codec_from_byte,
    codec_to_byte,
    compress_payload,
    decompress_payload,
)
from .container import _meta_text, _parse_meta
from .errors import CorruptionError, FormatError, ValidationError
from .quant import QuantParams, auto_range, dequantize, quantize
from .tensor import Category, FeatureMeta, FeatureTensor, compute_stats

__all__ = [
    "FRAME_MAGIC",
    "Mode",
    "FrameHeader",
    "encode_tensor",
    "decode_tensor",
    "parse_frame",
    "parse_header",
    "read_frame_bytes",
    "header_nbytes",
]

FRAME_MAGIC = b"FDF1"
FRAME_VERSION = 1

# Upper bound on any single payload; vgg16/conv1, the largest catalogued
# feature, is 12.25 MiB raw, so this is generous headroom, not a limit
# anyone should meet in practice.
MAX_PAYLOAD_BYTES = 1 << 30


class Mode(IntEnum):
    LOSSLESS = 0
    QUANTIZED = 1


def header_nbytes(ndims: int, meta_len: int, quantized: bool) -> int:
    return 31 + 4 * ndims + meta_len + (9 if quantized else 0)


@dataclass(frozen=True)
class FrameHeader:
    """Parsed FDF1 header; everything known before touching the payload."""

    codec: CodecId
    mode: Mode
    category: Category
    dims: tuple[int, ...]
    quant: QuantParams | None
    original_len: int
    compressed_len: int
    payload_crc: int
    meta: FeatureMeta

    @property
    def header_bytes(self) -> int:
        meta_len = len(_meta_text(self.meta))
        return header_nbytes(len(self.dims), meta_len, self.mode == Mode.QUANTIZED)

    @property
    def frame_bytes(self) -> int:
        return self.header_bytes + self.compressed_len

    @property
    def payload_rate(self) -> float:
        """Compressed payload bytes per raw byte."""
        return self.compressed_len / self.original_len

    @property
    def stream_rate(self) -> float:
        """Whole-frame bytes (header included) per raw byte."""
        return self.frame_bytes / self.original_len


def encode_tensor(
    t: FeatureTensor,
    codec: CodecId,
    params: CodecParams | None = None,
    quant: QuantParams | int | None = None,
) -> bytes:
    """Serialize one tensor to an FDF1 frame.

    ``quant`` selects the mode: None keeps the exact f32 payload, a
    QuantParams uses that grid, and a bare int picks a grid of that many
    bits spanning the tensor's own value range.
    """
    t.validate()
    if isinstance(quant, int):
        quant = auto_range(compute_stats(t), bits=quant)
    if quant is None:
        mode = Mode.LOSSLESS
        raw = t.payload_bytes()
    else:
        mode = Mode.QUANTIZED
        raw = quantize(t.values, quant)
    if t.volume_bytes > MAX_PAYLOAD_BYTES:
        raise ValidationError(f"tensor payload {t.volume_bytes} exceeds frame limit")
    meta = _meta_text(t.meta)
    if len(meta) > 0xFFFF:
        raise ValidationError(f"meta text is {len(meta)} bytes, limit 65535")

    compressed = compress_payload(raw, codec, params)
    ndims = len(t.dims)
    parts = [
        struct.pack(
            "<4sBBBBB",
            FRAME_MAGIC,
            FRAME_VERSION,
            codec_to_byte(codec),
            int(mode),
            int(t.meta.category),
            ndims,
        ),
        struct.pack(f"<{ndims}I", *t.dims),
    ]
    if quant is not None:
        parts.append(struct.pack("<Bff", quant.bits, quant.min_val, quant.max_val))
    parts.append(
        struct.pack(
            "<QQIH",
            t.volume_bytes,
            len(compressed),
            zlib.crc32(compressed),
            len(meta),
        )
    )
    parts.append(meta)
    parts.append(compressed)
    return b"".join(parts)


def _parse_header(blob: bytes | memoryview) -> tuple[FrameHeader, int]:
    """Parse the header of a frame; returns (header, payload offset)."""
    buf = memoryview(blob)

    def take(count: int, what: str) -> memoryview:
        nonlocal buf, offset
        if len(buf) < count:
            raise CorruptionError(f"truncated frame: expected {count} bytes of {what}")
        head, buf = buf[:count], buf[count:]
        offset += count
        return head

    offset = 0
    magic, version, codec_byte, mode_byte, cat_byte, ndims = struct.unpack(
        "<4sBBBBB", take(9, "header")
    )
    if magic != FRAME_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {FRAME_MAGIC!r}")
    if version != FRAME_VERSION:
        raise FormatError(f"unsupported frame version {version}")
    codec = codec_from_byte(codec_byte)
    try:
        mode = Mode(mode_byte)
    except ValueError:
        raise FormatError(f"unknown mode byte {mode_byte}") from None
    try:
        category = Category(cat_byte)
    except ValueError:
        raise FormatError(f"unknown category byte {cat_byte}") from None
    if not 1 <= ndims <= 4:
        raise FormatError(f"ndims must be 1..4, got {ndims}")
    dims = struct.unpack(f"<{ndims}I", take(4 * ndims, "extents"))
    if any(d == 0 for d in dims):
        raise ValidationError(f"extents must be positive, got {dims}")

    quant = None
    if mode == Mode.QUANTIZED:
        bits, lo, hi = struct.unpack("<Bff", take(9, "quantization grid"))
        try:
            quant = QuantParams(bits=bits, min_val=lo, max_val=hi)
        except ValueError as exc:
            raise FormatError(f"bad quantization grid: {exc}") from None

    original_len, compressed_len, crc, meta_len = struct.unpack(
        "<QQIH", take(22, "lengths")
    )
    expected = int(np.prod(dims, dtype=np.uint64)) * 4
    if original_len != expected:
        raise CorruptionError(
            f"originalLen {original_len} does not match dims {dims} (expected {expected})"
        )
    if original_len > MAX_PAYLOAD_BYTES or compressed_len > MAX_PAYLOAD_BYTES:
        raise CorruptionError("frame declares an implausibly large payload")
    meta = _parse_meta(bytes(take(meta_len, "meta")), category)

    header = FrameHeader(
        codec=codec,
        mode=mode,
        category=category,
        dims=dims,
        quant=quant,
        original_len=original_len,
        compressed_len=compressed_len,
        payload_crc=crc,
        meta=meta,
    )
    return header, offset


def parse_header(blob: bytes) -> FrameHeader:
    """Parse the frame header only; the payload is not validated."""
    return _parse_header(blob)[0]


def parse_frame(blob: bytes) -> tuple[FrameHeader, FeatureTensor]:
    """Decode one frame: verify the checksum, decompress, reconstruct.

    The CRC is checked before the payload is handed to any decompressor,
    so corrupt bytes are rejected up front rather than mid-decode.
    """
    header, offset = _parse_header(blob)
    payload = blob[offset : offset + header.compressed_len]
    if len(payload) != header.compressed_len:
        raise CorruptionError(
            f"truncated frame: payload is {len(payload)} bytes, header says {header.compressed_len}"
        )
    if len(blob) != offset + header.compressed_len:
        raise CorruptionError(
            f"frame has {len(blob) - offset - header.compressed_len} trailing bytes"
        )
    if zlib.crc32(payload) != header.payload_crc:
        raise CorruptionError("payload CRC mismatch")

    raw = decompress_payload(payload, header.codec)
    n = int(np.prod(header.dims, dtype=np.uint64))
    if header.mode == Mode.LOSSLESS:
        if len(raw) != header.original_len:
            raise CorruptionError(
                f"payload decoded to {len(raw)} bytes, expected {header.original_len}"
            )
        values = np.frombuffer(raw, dtype="<f4").copy()
    else:
        values = dequantize(raw, n, header.quant)
    if not np.isfinite(values).all():
        raise ValidationError("frame holds non-finite values")
    t = FeatureTensor(dims=header.dims, values=values, meta=header.meta)
    t.validate()
    return header, t


def decode_tensor(blob: bytes) -> FeatureTensor:
    """Decode one frame to its tensor; see parse_frame."""
    return parse_frame(blob)[1]


def read_frame_bytes(source: BinaryIO) -> bytes:
    """Read exactly one frame from a stream, using the declared lengths.

    Returns the raw frame bytes so the caller can forward them verbatim or
    hand them to parse_frame. Bytes after the frame are left in the source.
    """

    def read_exact(count: int, what: str) -> bytes:
        data = source.read(count)
        if len(data) != count:
            raise CorruptionError(f"truncated frame: expected {count} bytes of {what}")
        return data

    fixed = read_exact(9, "header")
    magic, version, _codec, mode_byte, _cat, ndims = struct.unpack("<4sBBBBB", fixed)
    if magic != FRAME_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {FRAME_MAGIC!r}")
    if version != FRAME_VERSION:
        raise FormatError(f"unsupported frame version {version}")
    if not 1 <= ndims <= 4:
        raise FormatError(f"ndims must be 1..4, got {ndims}")
    parts = [fixed, read_exact(4 * ndims, "extents")]
    if mode_byte == Mode.QUANTIZED:
        parts.append(read_exact(9, "quantization grid"))
    lengths = read_exact(22, "lengths")
    parts.append(lengths)
    _original, compressed_len, _crc, meta_len = struct.unpack("<QQIH", lengths)
    if compressed_len > MAX_PAYLOAD_BYTES:
        raise CorruptionError("frame declares an implausibly large payload")
    parts.append(read_exact(meta_len, "meta"))
    parts.append(read_exact(compressed_len, "payload"))
    return b"".join(parts)
