import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from featstream import (
    Category,
    CorruptionError,
    FeatureMeta,
    FeatureTensor,
    FormatError,
    ValidationError,
    generate_synthetic,
    load_container,
    peek_container,
    read_container,
    save_container,
    write_container,
)

from conftest import make_tensor


def roundtrip(t):
    buf = io.BytesIO()
    write_container(t, buf)
    buf.seek(0)
    return read_container(buf)


class TestRoundtrip:
    def test_single_zero_element(self):
        meta = FeatureMeta(network="n", layer="l", category=Category.FC)
        t = FeatureTensor(dims=(1,), values=np.array([0.0]), meta=meta)
        buf = io.BytesIO()
        nbytes = write_container(t, buf)
        # payload is exactly 4 bytes; the rest is header and checksum
        meta_len = len(b"network=n\nlayer=l\nsource=")
        assert nbytes == 8 + 4 + 4 + meta_len + 8 + 4 + 4
        buf.seek(0)
        assert read_container(buf) == t

    def test_conv5_payload_length(self):
        t = generate_synthetic((14, 14, 512), 0.068, seed=7)
        assert t.volume_bytes == 401408
        assert roundtrip(t) == t

    def test_negative_zero_preserved(self):
        meta = FeatureMeta(network="n", layer="l", category=Category.FC)
        t = FeatureTensor(dims=(2,), values=np.array([-0.0, 1.0]), meta=meta)
        back = roundtrip(t)
        assert back.values.tobytes() == t.values.tobytes()

    def test_deterministic_bytes(self, conv_tensor):
        a, b = io.BytesIO(), io.BytesIO()
        write_container(conv_tensor, a)
        write_container(conv_tensor, b)
        assert a.getvalue() == b.getvalue()

    def test_trailing_bytes_left_in_source(self, fc_tensor):
        buf = io.BytesIO()
        write_container(fc_tensor, buf)
        buf.write(b"unrelated trailing data")
        buf.seek(0)
        assert read_container(buf) == fc_tensor
        assert buf.read() == b"unrelated trailing data"

    @given(
        dims=st.one_of(
            st.tuples(st.integers(1, 50)),
            st.tuples(st.integers(1, 8), st.integers(1, 8), st.integers(1, 8)),
        ),
        seed=st.integers(0, 2**31),
        zero_fraction=st.floats(0.0, 1.0),
    )
    @settings(max_examples=60, deadline=None)
    def test_roundtrip_is_bit_exact(self, dims, seed, zero_fraction):
        t = make_tensor(dims, seed=seed, zero_fraction=zero_fraction)
        assert roundtrip(t) == t


class TestRejection:
    def test_bad_magic(self, fc_tensor):
        buf = io.BytesIO()
        write_container(fc_tensor, buf)
        blob = bytearray(buf.getvalue())
        blob[0] ^= 0xFF
        with pytest.raises(FormatError):
            read_container(io.BytesIO(bytes(blob)))

    def test_bad_version(self, fc_tensor):
        buf = io.BytesIO()
        write_container(fc_tensor, buf)
        blob = bytearray(buf.getvalue())
        blob[4] = 99
        with pytest.raises(FormatError):
            read_container(io.BytesIO(bytes(blob)))

    def test_truncated_payload(self, fc_tensor):
        buf = io.BytesIO()
        write_container(fc_tensor, buf)
        blob = buf.getvalue()
        with pytest.raises(CorruptionError):
            read_container(io.BytesIO(blob[: len(blob) - 30]))

    def test_payload_crc_flip(self, fc_tensor):
        buf = io.BytesIO()
        write_container(fc_tensor, buf)
        blob = bytearray(buf.getvalue())
        blob[-10] ^= 0x01  # inside the payload
        with pytest.raises(CorruptionError):
            read_container(io.BytesIO(bytes(blob)))

    def test_non_finite_write_rejected(self):
        meta = FeatureMeta(network="n", layer="l", category=Category.FC)
        t = FeatureTensor(dims=(2,), values=np.array([1.0, np.inf]), meta=meta)
        with pytest.raises(ValidationError):
            write_container(t, io.BytesIO())

    def test_non_finite_read_rejected(self, fc_tensor):
        buf = io.BytesIO()
        write_container(fc_tensor, buf)
        blob = bytearray(buf.getvalue())
        # overwrite one payload element with +inf, then fix the checksum
        import struct
        import zlib

        payload_start = len(blob) - 4 - fc_tensor.volume_bytes
        blob[payload_start : payload_start + 4] = struct.pack("<f", np.inf)
        payload = bytes(blob[payload_start : payload_start + fc_tensor.volume_bytes])
        blob[-4:] = struct.pack("<I", zlib.crc32(payload))
        with pytest.raises(ValidationError):
            read_container(io.BytesIO(bytes(blob)))

    def test_empty_source(self):
        with pytest.raises(CorruptionError):
            read_container(io.BytesIO(b""))


class TestFiles:
    def test_save_load(self, tmp_path, conv_tensor):
        path = tmp_path / "t.ftc"
        save_container(conv_tensor, path)
        assert load_container(path) == conv_tensor

    def test_peek_skips_payload(self, tmp_path, conv_tensor):
        path = tmp_path / "t.ftc"
        save_container(conv_tensor, path)
        with open(path, "rb") as fh:
            meta, dims = peek_container(fh)
            trailing = fh.read()
        assert meta == conv_tensor.meta
        assert dims == conv_tensor.dims
        assert trailing == b""
