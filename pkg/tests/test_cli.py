import signal
import subprocess
import sys
import time

import pytest

from featstream import (
    compute_stats,
    decode_tensor,
    encode_tensor,
    load_container,
    save_container,
)
from featstream.cli import EXIT_DATA, EXIT_NETWORK, EXIT_OK, EXIT_USAGE, main
from featstream.codecs import parse_codec
from featstream.transport import serve_edge

from conftest import make_tensor


def run(*argv):
    return main(list(argv))


class TestUsage:
    def test_no_subcommand(self, capsys):
        assert run() == EXIT_USAGE

    def test_unknown_subcommand(self, capsys):
        assert run("frobnicate") == EXIT_USAGE

    def test_missing_required_argument(self, capsys):
        assert run("gen", "out.ftc", "--shape", "4x4x4") == EXIT_USAGE

    def test_bad_shape(self, capsys):
        assert run("gen", "out.ftc", "--shape", "4x4x4x4x4", "--nonzero", "0.5") == EXIT_USAGE

    def test_bad_codec_name(self, capsys, tmp_path):
        assert run("compress", "in.ftc", "out.fdf", "--codec", "zip9") == EXIT_USAGE

    def test_bad_nonzero_rate(self, capsys, tmp_path):
        out = tmp_path / "t.ftc"
        assert run("gen", str(out), "--shape", "4x4x4", "--nonzero", "1.5") == EXIT_USAGE

    def test_bad_quant_bits(self, capsys):
        assert run("compress", "a", "b", "--quant-bits", "17") == EXIT_USAGE


class TestPipelines:
    def test_gen_compress_decompress_identity(self, tmp_path, capsys):
        src = tmp_path / "a.ftc"
        frame = tmp_path / "a.fdf"
        back = tmp_path / "b.ftc"
        assert run("gen", str(src), "--shape", "6x6x32", "--nonzero", "0.25",
                   "--seed", "3", "--network", "vgg16", "--layer", "conv5") == EXIT_OK
        assert run("compress", str(src), str(frame), "--codec", "zeromask+gzip") == EXIT_OK
        assert run("decompress", str(frame), str(back)) == EXIT_OK
        assert back.read_bytes() == src.read_bytes()

    def test_compress_matches_library_call(self, tmp_path, capsys):
        t = make_tensor((5, 5, 8), seed=4)
        src = tmp_path / "t.ftc"
        frame = tmp_path / "t.fdf"
        save_container(t, src)
        assert run("compress", str(src), str(frame), "--codec", "bz2") == EXIT_OK
        assert frame.read_bytes() == encode_tensor(t, parse_codec("bz2"))

    def test_quantized_compress_roundtrip(self, tmp_path, capsys):
        t = make_tensor((8, 8, 4), seed=1)
        src = tmp_path / "t.ftc"
        frame = tmp_path / "t.fdf"
        back = tmp_path / "u.ftc"
        save_container(t, src)
        assert run("compress", str(src), str(frame), "--quant-bits", "8") == EXIT_OK
        assert run("decompress", str(frame), str(back)) == EXIT_OK
        got = load_container(back)
        assert got.dims == t.dims
        assert got.meta == t.meta

    def test_gen_respects_rate(self, tmp_path, capsys):
        out = tmp_path / "g.ftc"
        assert run("gen", str(out), "--shape", "1000", "--nonzero", "0.3") == EXIT_OK
        stats = compute_stats(load_container(out))
        assert stats.non_zero_rate == pytest.approx(0.3, abs=1e-3)


class TestInspect:
    def test_container_fields(self, tmp_path, capsys):
        t = make_tensor((14, 14, 512), seed=0, network="vgg16", layer="conv5",
                        source="img0")
        src = tmp_path / "c.ftc"
        save_container(t, src)
        assert run("inspect", str(src)) == EXIT_OK
        text = capsys.readouterr().out
        assert "format: FTC1 container" in text
        assert "network: vgg16" in text
        assert "layer: conv5" in text
        assert "dims: 14x14x512" in text
        assert "payloadLen: 401408" in text

    def test_frame_fields(self, tmp_path, capsys):
        t = make_tensor((4, 4, 4), seed=2)
        frame = tmp_path / "c.fdf"
        frame.write_bytes(encode_tensor(t, parse_codec("lzma")))
        assert run("inspect", str(frame)) == EXIT_OK
        text = capsys.readouterr().out
        assert "format: FDF1 frame" in text
        assert "codec: lzma" in text
        assert "mode: LOSSLESS" in text
        assert "originalLen: 256" in text

    def test_quantized_frame_shows_bits(self, tmp_path, capsys):
        t = make_tensor((4, 4, 4), seed=2)
        frame = tmp_path / "q.fdf"
        frame.write_bytes(encode_tensor(t, parse_codec("gzip"), quant=6))
        assert run("inspect", str(frame)) == EXIT_OK
        text = capsys.readouterr().out
        assert "mode: QUANTIZED" in text
        assert "quantBits: 6" in text


class TestBench:
    def test_csv_row_per_layer_codec(self, tmp_path, capsys):
        store = tmp_path / "feats"
        store.mkdir()
        for i in range(3):
            save_container(make_tensor((6, 6, 8), seed=i, network="vgg16",
                                       layer="conv5", source=f"s{i}"),
                           store / f"c{i}.ftc")
        for i in range(2):
            save_container(make_tensor((64,), seed=i, network="vgg16",
                                       layer="fc1", source=f"s{i}"),
                           store / f"f{i}.ftc")
        out = tmp_path / "report.csv"
        assert run("bench", str(store), str(out), "--codecs", "gzip,bz2",
                   "--repeat", "1") == EXIT_OK
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("network,feat_type,feat_shape,")
        assert len(lines) == 1 + 2 * 2  # two layers x two codecs
        assert sum("conv5" in line for line in lines[1:]) == 2

    def test_markdown_to_stdout(self, tmp_path, capsys):
        store = tmp_path / "feats"
        store.mkdir()
        save_container(make_tensor((6, 6, 8), seed=0, network="vgg16",
                                   layer="conv5"), store / "c.ftc")
        assert run("bench", str(store), "--codecs", "gzip", "--repeat", "1",
                   "--format", "md") == EXIT_OK
        text = capsys.readouterr().out
        assert "## vgg16" in text
        assert "gzip Rate" in text

    def test_missing_directory(self, tmp_path, capsys):
        assert run("bench", str(tmp_path / "nope")) == EXIT_DATA


class TestExitCodes:
    def test_missing_input_is_data_error(self, tmp_path, capsys):
        assert run("compress", str(tmp_path / "no.ftc"), str(tmp_path / "o.fdf")) == EXIT_DATA

    def test_corrupt_input_is_data_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.fdf"
        bad.write_bytes(b"FDF1 this is not a frame")
        assert run("decompress", str(bad), str(tmp_path / "o.ftc")) == EXIT_DATA

    def test_unreachable_endpoint_is_network_error(self, tmp_path, capsys):
        assert run("fetch", str(tmp_path / "o.ftc"), "--endpoint", "127.0.0.1:1",
                   "--network", "n", "--layer", "l") == EXIT_NETWORK

    def test_not_found_is_network_error(self, tmp_path, capsys):
        store = tmp_path / "feats"
        store.mkdir()
        save_container(make_tensor((4,), seed=0, network="n", layer="l"), store / "t.ftc")
        with serve_edge(store) as server:
            host, port = server.address
            code = run("fetch", str(tmp_path / "o.ftc"),
                       "--endpoint", f"{host}:{port}",
                       "--network", "n", "--layer", "missing")
        assert code == EXIT_NETWORK


class TestFetch:
    def test_fetch_writes_identical_container(self, tmp_path, capsys):
        store = tmp_path / "feats"
        store.mkdir()
        t = make_tensor((6, 6, 16), seed=5, network="vgg16", layer="conv5", source="img0")
        save_container(t, store / "t.ftc")
        out = tmp_path / "fetched.ftc"
        with serve_edge(store) as server:
            host, port = server.address
            code = run("fetch", str(out), "--endpoint", f"{host}:{port}",
                       "--network", "vgg16", "--layer", "conv5", "--source", "img0",
                       "--codec", "zeromask+bz2")
        assert code == EXIT_OK
        assert load_container(out) == t


class TestServeProcess:
    def test_sigterm_stops_cleanly(self, tmp_path):
        store = tmp_path / "feats"
        store.mkdir()
        save_container(make_tensor((4,), seed=0, network="n", layer="l"), store / "t.ftc")
        proc = subprocess.Popen(
            [sys.executable, "-m", "featstream", "serve", "--store", str(store),
             "--listen", "127.0.0.1:0"],
            stderr=subprocess.PIPE,
            text=True,
        )
        try:
            line = proc.stderr.readline()
            assert "serving 1 features on 127.0.0.1:" in line
            time.sleep(0.2)
            proc.send_signal(signal.SIGTERM)
            assert proc.wait(timeout=10) == EXIT_OK
        finally:
            if proc.poll() is None:
                proc.kill()
                proc.wait()
