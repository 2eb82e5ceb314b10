"""Edge-cloud feature transfer over a length-prefixed TCP protocol.

The edge side serves a read-only directory of FTC1 containers. A cloud
client asks for one feature by (network, layer, sourceId) and names the
codec, mode, and quantization depth; the edge compresses on demand and
replies with a single FDF1 frame. One request is in flight per connection;
parallelism comes from opening more connections.

Wire format (little-endian): every frame is u32 frameLen then frameLen
bytes, the first of which is the message type (1=REQUEST, 2=RESPONSE).
REQUEST body: three u16-length-prefixed UTF-8 strings (network, layer,
sourceId), then u8 codecId, u8 mode, u8 quantBits (0 = lossless).
RESPONSE body: u8 status, u64 payloadLen, then payloadLen bytes of FDF1
frame, present only when status is OK.
"""

from __future__ import annotations

import logging
import socket
import socketserver
import struct
import threading
import time
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import BinaryIO

from .bitstream import FrameHeader, encode_tensor, parse_frame
from .codecs import DEFLATE_GZ, CodecId, codec_from_byte, codec_to_byte
from .container import load_container, peek_container
from .errors import FeatstreamError, FormatError, ProtocolError, TransportError
from .quant import MAX_BITS, MIN_BITS
from .tensor import FeatureTensor

__all__ = [
    "MsgType",
    "Status",
    "FeatureRequest",
    "TransferStats",
    "FeatureStore",
    "EdgeServer",
    "FeatureClient",
    "serve_edge",
    "request_feature",
    "MAX_FRAME_BYTES",
]

log = logging.getLogger("featstream.transport")

MAX_FRAME_BYTES = 256 * 1024 * 1024


class MsgType(IntEnum):
    REQUEST = 1
    RESPONSE = 2


class Status(IntEnum):
    OK = 0
    NOT_FOUND = 1
    CODEC_ERROR = 2
    BAD_REQUEST = 3


@dataclass(frozen=True)
class FeatureRequest:
    """What the cloud side asks for and how it wants it encoded."""

    network: str
    layer: str
    source_id: str = ""
    codec: CodecId = DEFLATE_GZ
    quant_bits: int = 0

    @property
    def quantized(self) -> bool:
        return self.quant_bits != 0

    def validate(self) -> None:
        if not self.layer:
            raise FormatError("request layer must be non-empty")
        if self.quant_bits and not MIN_BITS <= self.quant_bits <= MAX_BITS:
            raise FormatError(
                f"quantBits must be 0 or {MIN_BITS}..{MAX_BITS}, got {self.quant_bits}"
            )


@dataclass(frozen=True)
class TransferStats:
    """Measured cost of one transfer.

    ``wire_bytes`` counts the full response frame including its 4-byte
    length prefix; ``request_bytes`` likewise counts the request frame.
    """

    wire_bytes: int
    request_bytes: int
    elapsed_seconds: float
    header: FrameHeader


# --- framing ---------------------------------------------------------------


def write_frame(sink: BinaryIO, msg_type: MsgType, body: bytes) -> int:
    """Write one frame; returns total bytes on the wire (prefix included)."""
    frame_len = 1 + len(body)
    if frame_len > MAX_FRAME_BYTES:
        raise ProtocolError(f"frame of {frame_len} bytes exceeds limit {MAX_FRAME_BYTES}")
    sink.write(struct.pack("<IB", frame_len, int(msg_type)) + body)
    sink.flush()
    return 4 + frame_len


def read_frame(source: BinaryIO, max_frame: int = MAX_FRAME_BYTES):
    """Read one frame; returns (msg_type, body, wire_bytes) or None at EOF.

    The declared length is checked against the limit before any body byte
    is read. A mid-frame EOF, an oversize declaration, or an unknown
    message type byte raises ProtocolError; the caller should drop the
    connection, because the stream position is no longer trustworthy.
    """
    prefix = source.read(4)
    if not prefix:
        return None
    if len(prefix) < 4:
        raise ProtocolError("truncated frame length prefix")
    (frame_len,) = struct.unpack("<I", prefix)
    if frame_len < 1:
        raise ProtocolError("frame length must cover the message type byte")
    if frame_len > max_frame:
        raise ProtocolError(f"declared frame of {frame_len} bytes exceeds limit {max_frame}")
    frame = source.read(frame_len)
    if len(frame) != frame_len:
        raise ProtocolError(f"truncated frame: got {len(frame)} of {frame_len} bytes")
    try:
        msg_type = MsgType(frame[0])
    except ValueError:
        raise ProtocolError(f"unknown message type byte {frame[0]}") from None
    return msg_type, frame[1:], 4 + frame_len


def _pack_str(text: str) -> bytes:
    blob = text.encode("utf-8")
    if len(blob) > 0xFFFF:
        raise ValueError(f"string field of {len(blob)} bytes exceeds u16 length")
    return struct.pack("<H", len(blob)) + blob


def encode_request(req: FeatureRequest) -> bytes:
    req.validate()
    mode = 1 if req.quantized else 0
    return b"".join(
        [
            _pack_str(req.network),
            _pack_str(req.layer),
            _pack_str(req.source_id),
            struct.pack("<BBB", codec_to_byte(req.codec), mode, req.quant_bits),
        ]
    )


def _take(buf: memoryview, count: int, what: str) -> tuple[memoryview, memoryview]:
    if len(buf) < count:
        raise FormatError(f"request body truncated reading {what}")
    return buf[:count], buf[count:]


def parse_request(body: bytes) -> FeatureRequest:
    """Decode and validate a REQUEST body; FormatError on anything unusable."""
    buf = memoryview(body)
    texts = []
    for what in ("network", "layer", "sourceId"):
        head, buf = _take(buf, 2, f"{what} length")
        (length,) = struct.unpack("<H", head)
        raw, buf = _take(buf, length, what)
        try:
            texts.append(bytes(raw).decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise FormatError(f"{what} is not valid UTF-8: {exc}") from exc
    tail, buf = _take(buf, 3, "codec/mode/bits")
    if len(buf):
        raise FormatError(f"request body has {len(buf)} trailing bytes")
    codec_byte, mode, bits = struct.unpack("<BBB", tail)
    codec = codec_from_byte(codec_byte)
    if mode not in (0, 1):
        raise FormatError(f"unknown mode byte {mode}")
    if (mode == 1) != (bits != 0):
        raise FormatError(f"mode {mode} is inconsistent with quantBits {bits}")
    req = FeatureRequest(
        network=texts[0], layer=texts[1], source_id=texts[2], codec=codec, quant_bits=bits
    )
    req.validate()
    return req


def encode_response(status: Status, payload: bytes = b"") -> bytes:
    if status != Status.OK and payload:
        raise ValueError(f"status {status.name} must carry no payload")
    return struct.pack("<BQ", int(status), len(payload)) + payload


def parse_response(body: bytes) -> tuple[Status, bytes]:
    buf = memoryview(body)
    head, buf = _take(buf, 9, "status/length")
    status_byte, payload_len = struct.unpack("<BQ", head)
    try:
        status = Status(status_byte)
    except ValueError:
        raise FormatError(f"unknown status byte {status_byte}") from None
    if payload_len != len(buf):
        raise FormatError(f"payload length {payload_len} does not match body ({len(buf)})")
    if status != Status.OK and payload_len:
        raise FormatError(f"status {status.name} must carry no payload")
    return status, bytes(buf)


# --- edge server ------------------------------------------------------------


class FeatureStore:
    """Read-only index over a directory of FTC1 containers.

    The directory is scanned once at construction; each readable container
    is indexed by (network, layer, sourceId). Files that do not parse are
    skipped with a warning so one stray file cannot take the store down.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        if not self.root.is_dir():
            raise FileNotFoundError(f"feature store {self.root} is not a directory")
        self._index: dict[tuple[str, str, str], Path] = {}
        for path in sorted(self.root.iterdir()):
            if not path.is_file():
                continue
            try:
                with open(path, "rb") as fh:
                    meta, _dims = peek_container(fh)
            except (FeatstreamError, OSError) as exc:
                log.warning("store: skipping %s: %s", path, exc)
                continue
            key = (meta.network, meta.layer, meta.source_id)
            if key in self._index:
                log.warning("store: duplicate feature %s in %s, keeping %s",
                            key, path, self._index[key])
                continue
            self._index[key] = path

    def __len__(self) -> int:
        return len(self._index)

    def lookup(self, network: str, layer: str, source_id: str) -> Path | None:
        return self._index.get((network, layer, source_id))

    def load(self, network: str, layer: str, source_id: str) -> FeatureTensor | None:
        path = self.lookup(network, layer, source_id)
        return None if path is None else load_container(path)


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        store: FeatureStore = self.server.store
        while True:
            try:
                frame = read_frame(self.rfile)
            except ProtocolError as exc:
                log.info("closing %s: %s", self.client_address, exc)
                return
            if frame is None:
                return
            msg_type, body, _ = frame
            if msg_type != MsgType.REQUEST:
                log.info("closing %s: unexpected %s frame", self.client_address, msg_type.name)
                return
            status, payload = self._answer(store, body)
            try:
                write_frame(self.wfile, MsgType.RESPONSE, encode_response(status, payload))
            except OSError:
                return

    @staticmethod
    def _answer(store: FeatureStore, body: bytes) -> tuple[Status, bytes]:
        try:
            req = parse_request(body)
        except (FormatError, ValueError) as exc:
            log.info("bad request: %s", exc)
            return Status.BAD_REQUEST, b""
        try:
            tensor = store.load(req.network, req.layer, req.source_id)
        except (FeatstreamError, OSError) as exc:
            log.warning("store read failed for %s/%s/%s: %s",
                        req.network, req.layer, req.source_id, exc)
            return Status.CODEC_ERROR, b""
        if tensor is None:
            return Status.NOT_FOUND, b""
        try:
            frame = encode_tensor(tensor, req.codec, quant=req.quant_bits or None)
        except (FeatstreamError, ValueError) as exc:
            log.warning("encode failed for %s/%s/%s: %s",
                        req.network, req.layer, req.source_id, exc)
            return Status.CODEC_ERROR, b""
        return Status.OK, frame


class _Server(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class EdgeServer:
    """Serving handle: owns the socket, the store index, and the accept thread."""

    def __init__(self, store: FeatureStore | str | Path, host: str = "127.0.0.1", port: int = 0):
        if not isinstance(store, FeatureStore):
            store = FeatureStore(store)
        self.store = store
        self._server = _Server((host, port), _Handler)
        self._server.store = store
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        host, port = self._server.server_address[:2]
        return host, port

    def start(self) -> "EdgeServer":
        if self._thread is not None:
            raise RuntimeError("server already started")
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        return self

    def serve_forever(self) -> None:
        """Serve on the calling thread until shutdown() is called."""
        self._server.serve_forever()

    def shutdown(self) -> None:
        self._server.shutdown()
        self._server.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None

    def __enter__(self) -> "EdgeServer":
        if self._thread is None:
            self.start()
        return self

    def __exit__(self, *exc_info) -> None:
        self.shutdown()


def serve_edge(store_dir: str | Path, host: str = "127.0.0.1", port: int = 0) -> EdgeServer:
    """Index ``store_dir`` and start answering requests in the background.

    Returns the running handle; use .address for the bound endpoint and
    .shutdown() (or a with block) to stop it.
    """
    return EdgeServer(store_dir, host, port).start()


# --- cloud client -----------------------------------------------------------


class FeatureClient:
    """One connection to an edge server; requests run one at a time.

    For parallel fetches open one client per worker. Usable as a context
    manager.
    """

    def __init__(self, host: str, port: int, timeout: float = 30.0):
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc
        self._file = self._sock.makefile("rwb")

    def close(self) -> None:
        try:
            self._file.close()
        finally:
            self._sock.close()

    def __enter__(self) -> "FeatureClient":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()

    def request(
        self,
        network: str,
        layer: str,
        source_id: str = "",
        codec: CodecId = DEFLATE_GZ,
        quant_bits: int = 0,
    ) -> tuple[FeatureTensor, TransferStats]:
        """Fetch one feature; returns the decoded tensor and transfer stats.

        Raises TransportError for connection trouble or a non-OK status
        (the status lands in .status), and CorruptionError if the payload
        fails its checksum.
        """
        req = FeatureRequest(
            network=network, layer=layer, source_id=source_id, codec=codec, quant_bits=quant_bits
        )
        body = encode_request(req)
        start = time.perf_counter()
        try:
            request_bytes = write_frame(self._file, MsgType.REQUEST, body)
            frame = read_frame(self._file)
        except (OSError, ProtocolError) as exc:
            raise TransportError(f"transfer failed: {exc}") from exc
        if frame is None:
            raise TransportError("server closed the connection before responding")
        elapsed = time.perf_counter() - start
        msg_type, resp_body, wire_bytes = frame
        if msg_type != MsgType.RESPONSE:
            raise TransportError(f"expected RESPONSE, got {msg_type.name}")
        status, payload = parse_response(resp_body)
        if status != Status.OK:
            raise TransportError(
                f"server answered {status.name} for {network}/{layer}/{source_id!r}",
                status=status,
            )
        header, tensor = parse_frame(payload)
        stats = TransferStats(
            wire_bytes=wire_bytes,
            request_bytes=request_bytes,
            elapsed_seconds=elapsed,
            header=header,
        )
        return tensor, stats


def request_feature(
    host: str,
    port: int,
    network: str,
    layer: str,
    source_id: str = "",
    codec: CodecId = DEFLATE_GZ,
    quant_bits: int = 0,
) -> tuple[FeatureTensor, TransferStats]:
    """One-shot convenience wrapper around FeatureClient."""
    with FeatureClient(host, port) as client:
        return client.request(network, layer, source_id, codec, quant_bits)
