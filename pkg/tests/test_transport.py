import io
import socket
import struct
import threading

import numpy as np
import pytest

from featstream import (
    BZ2,
    DEFLATE_GZ,
    CorruptionError,
    FormatError,
    ProtocolError,
    TransportError,
    error_bound,
    generate_synthetic,
    load_container,
    save_container,
)
from featstream.codecs import LZMA1, STORE, zeromask
from featstream.transport import (
    EdgeServer,
    FeatureClient,
    FeatureRequest,
    FeatureStore,
    MsgType,
    Status,
    encode_request,
    encode_response,
    parse_request,
    parse_response,
    read_frame,
    request_feature,
    serve_edge,
    write_frame,
)

from conftest import make_tensor


class TestFraming:
    def test_identity(self):
        for body in (b"", b"x", b"hello" * 100):
            for msg_type in (MsgType.REQUEST, MsgType.RESPONSE):
                buf = io.BytesIO()
                wire = write_frame(buf, msg_type, body)
                assert wire == 4 + 1 + len(body)
                buf.seek(0)
                got_type, got_body, got_wire = read_frame(buf)
                assert (got_type, got_body, got_wire) == (msg_type, body, wire)

    def test_eof_at_boundary(self):
        assert read_frame(io.BytesIO(b"")) is None

    def test_truncated_prefix(self):
        with pytest.raises(ProtocolError):
            read_frame(io.BytesIO(b"\x01\x02"))

    def test_truncated_body(self):
        buf = io.BytesIO()
        write_frame(buf, MsgType.REQUEST, b"abcdef")
        with pytest.raises(ProtocolError):
            read_frame(io.BytesIO(buf.getvalue()[:-2]))

    def test_oversize_rejected_before_body_read(self):
        class Source:
            def __init__(self):
                self.calls = 0

            def read(self, n):
                self.calls += 1
                if self.calls == 1:
                    return struct.pack("<I", 2**31)
                raise AssertionError("body read attempted on oversize frame")

        with pytest.raises(ProtocolError):
            read_frame(Source())

    def test_zero_length_rejected(self):
        with pytest.raises(ProtocolError):
            read_frame(io.BytesIO(struct.pack("<I", 0)))

    def test_unknown_msg_type(self):
        buf = io.BytesIO(struct.pack("<IB", 1, 9))
        with pytest.raises(ProtocolError):
            read_frame(buf)


class TestRequestCodec:
    def test_roundtrip(self):
        reqs = [
            FeatureRequest(network="vgg16", layer="conv5", source_id="img3"),
            FeatureRequest(network="", layer="l", source_id="", codec=zeromask(STORE)),
            FeatureRequest(network="n", layer="fc1", codec=LZMA1, quant_bits=8),
        ]
        for req in reqs:
            assert parse_request(encode_request(req)) == req

    def test_empty_layer_rejected(self):
        with pytest.raises(FormatError):
            encode_request(FeatureRequest(network="n", layer=""))

    def test_bad_quant_bits_rejected(self):
        with pytest.raises(FormatError):
            encode_request(FeatureRequest(network="n", layer="l", quant_bits=1))

    def test_mode_bits_consistency_enforced(self):
        good = bytearray(encode_request(FeatureRequest(network="n", layer="l")))
        good[-2] = 1  # claim QUANTIZED while quantBits stays 0
        with pytest.raises(FormatError):
            parse_request(bytes(good))

    def test_unknown_codec_byte(self):
        body = bytearray(encode_request(FeatureRequest(network="n", layer="l")))
        body[-3] = 0x66
        with pytest.raises(FormatError):
            parse_request(bytes(body))

    def test_trailing_bytes_rejected(self):
        body = encode_request(FeatureRequest(network="n", layer="l"))
        with pytest.raises(FormatError):
            parse_request(body + b"z")

    def test_truncated_rejected(self):
        body = encode_request(FeatureRequest(network="n", layer="l"))
        with pytest.raises(FormatError):
            parse_request(body[:-1])


class TestResponseCodec:
    def test_ok_roundtrip(self):
        status, payload = parse_response(encode_response(Status.OK, b"framebytes"))
        assert status == Status.OK
        assert payload == b"framebytes"

    def test_error_statuses_carry_no_payload(self):
        for status in (Status.NOT_FOUND, Status.CODEC_ERROR, Status.BAD_REQUEST):
            body = encode_response(status)
            assert parse_response(body) == (status, b"")
            with pytest.raises(ValueError):
                encode_response(status, b"data")

    def test_length_mismatch(self):
        body = encode_response(Status.OK, b"abc")
        with pytest.raises(FormatError):
            parse_response(body + b"d")

    def test_unknown_status(self):
        body = bytearray(encode_response(Status.OK, b""))
        body[0] = 77
        with pytest.raises(FormatError):
            parse_response(bytes(body))


@pytest.fixture
def store_dir(tmp_path):
    root = tmp_path / "store"
    root.mkdir()
    for i in range(4):
        t = make_tensor((6, 6, 16), seed=i, network="vgg16", layer="conv5", source=f"img{i}")
        save_container(t, root / f"conv5_{i}.ftc")
    t = make_tensor((40,), seed=9, network="vgg16", layer="fc1", source="img0")
    save_container(t, root / "fc1_0.ftc")
    return root


class TestFeatureStore:
    def test_indexing(self, store_dir):
        store = FeatureStore(store_dir)
        assert len(store) == 5
        assert store.lookup("vgg16", "conv5", "img2") is not None
        assert store.lookup("vgg16", "conv5", "img9") is None
        assert store.load("vgg16", "fc1", "img0") is not None

    def test_unreadable_file_skipped(self, store_dir, caplog):
        (store_dir / "broken.ftc").write_bytes(b"garbage")
        store = FeatureStore(store_dir)
        assert len(store) == 5

    def test_duplicate_keeps_first(self, store_dir):
        t = make_tensor((6, 6, 16), seed=50, network="vgg16", layer="conv5", source="img0")
        save_container(t, store_dir / "zz_dup.ftc")
        store = FeatureStore(store_dir)
        assert len(store) == 5
        assert store.lookup("vgg16", "conv5", "img0").name == "conv5_0.ftc"

    def test_missing_directory(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            FeatureStore(tmp_path / "nope")


class TestEndToEnd:
    def test_lossless_identity(self, store_dir):
        with serve_edge(store_dir) as server:
            host, port = server.address
            tensor, stats = request_feature(host, port, "vgg16", "conv5", "img1",
                                            codec=zeromask(BZ2))
        assert tensor == load_container(store_dir / "conv5_1.ftc")
        assert stats.header.codec == zeromask(BZ2)

    def test_wire_accounting(self, store_dir):
        with serve_edge(store_dir) as server:
            host, port = server.address
            _tensor, stats = request_feature(host, port, "vgg16", "fc1", "img0")
        # response frame: u32 prefix + msgType + status + u64 len + payload
        frame_body_len = 1 + 1 + 8 + stats.header.frame_bytes
        assert stats.wire_bytes == 4 + frame_body_len

    def test_sequential_requests_one_connection(self, store_dir):
        with serve_edge(store_dir) as server:
            host, port = server.address
            with FeatureClient(host, port) as client:
                for i in range(4):
                    tensor, _ = client.request("vgg16", "conv5", f"img{i}")
                    assert tensor.meta.source_id == f"img{i}"

    def test_not_found(self, store_dir):
        with serve_edge(store_dir) as server:
            host, port = server.address
            with pytest.raises(TransportError) as info:
                request_feature(host, port, "vgg16", "conv7", "img0")
            assert info.value.status == Status.NOT_FOUND

    def test_quantized_fetch_error_bound(self, store_dir):
        original = load_container(store_dir / "conv5_2.ftc")
        with serve_edge(store_dir) as server:
            host, port = server.address
            tensor, stats = request_feature(host, port, "vgg16", "conv5", "img2",
                                            quant_bits=8)
        bound = error_bound(stats.header.quant)
        err = np.max(np.abs(tensor.values.astype(np.float64)
                            - original.values.astype(np.float64)))
        assert err <= bound

    def test_bad_request_keeps_connection_open(self, store_dir):
        with serve_edge(store_dir) as server:
            host, port = server.address
            with socket.create_connection((host, port), timeout=5) as sock:
                f = sock.makefile("rwb")
                # codec byte 0x66 is not assigned
                body = encode_request(FeatureRequest(network="vgg16", layer="conv5",
                                                     source_id="img0"))
                bad = bytearray(body)
                bad[-3] = 0x66
                write_frame(f, MsgType.REQUEST, bytes(bad))
                _type, resp, _ = read_frame(f)
                assert parse_response(resp)[0] == Status.BAD_REQUEST
                # the same connection still answers a good request
                write_frame(f, MsgType.REQUEST, body)
                _type, resp, _ = read_frame(f)
                status, payload = parse_response(resp)
                assert status == Status.OK
                assert payload

    def test_malformed_frame_closes_connection(self, store_dir):
        with serve_edge(store_dir) as server:
            host, port = server.address
            with socket.create_connection((host, port), timeout=5) as sock:
                f = sock.makefile("rwb")
                f.write(struct.pack("<I", 2**30) + b"x")
                f.flush()
                assert f.read(1) == b""  # server hung up

    def test_store_corrupted_after_indexing_is_codec_error(self, store_dir):
        with serve_edge(store_dir) as server:
            host, port = server.address
            (store_dir / "fc1_0.ftc").write_bytes(b"rotted")
            with pytest.raises(TransportError) as info:
                request_feature(host, port, "vgg16", "fc1", "img0")
            assert info.value.status == Status.CODEC_ERROR

    def test_server_down_is_connection_error(self):
        with pytest.raises(TransportError) as info:
            request_feature("127.0.0.1", 1, "n", "l")
        assert info.value.status is None

    def test_concurrent_clients_get_their_own_payloads(self, store_dir):
        originals = {
            f"img{i}": load_container(store_dir / f"conv5_{i}.ftc") for i in range(4)
        }
        errors = []

        def worker(host, port, idx):
            source = f"img{idx % 4}"
            try:
                with FeatureClient(host, port) as client:
                    for _ in range(5):
                        tensor, _ = client.request("vgg16", "conv5", source)
                        if tensor != originals[source]:
                            errors.append(f"{source}: payload mismatch")
                        if tensor.meta.source_id != source:
                            errors.append(f"{source}: wrong source echo")
            except Exception as exc:  # surfaced after join
                errors.append(f"{source}: {exc!r}")

        with serve_edge(store_dir) as server:
            host, port = server.address
            threads = [
                threading.Thread(target=worker, args=(host, port, i)) for i in range(8)
            ]
            for t in threads:
                t.start()
            for t in threads:
                t.join(timeout=30)
        assert errors == []

    def test_corrupted_payload_raises_integrity_error(self, store_dir, monkeypatch):
        import featstream.transport as transport_mod

        real_encode = transport_mod.encode_tensor

        def corrupt(*args, **kwargs):
            frame = bytearray(real_encode(*args, **kwargs))
            frame[-1] ^= 0x20  # flip a payload bit after the CRC was computed
            return bytes(frame)

        monkeypatch.setattr(transport_mod, "encode_tensor", corrupt)
        with serve_edge(store_dir) as server:
            host, port = server.address
            with pytest.raises(CorruptionError):
                request_feature(host, port, "vgg16", "conv5", "img0")


class TestServerHandle:
    def test_double_start_rejected(self, store_dir):
        server = EdgeServer(store_dir)
        try:
            server.start()
            with pytest.raises(RuntimeError):
                server.start()
        finally:
            server.shutdown()

    def test_shutdown_releases_port(self, store_dir):
        server = serve_edge(store_dir)
        host, port = server.address
        server.shutdown()
        with pytest.raises(TransportError):
            request_feature(host, port, "vgg16", "conv5", "img0")
