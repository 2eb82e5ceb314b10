"""Command-line interface to every primary capability.

Each subcommand is a thin adapter over the library modules; anything the
CLI can do, a direct module call does identically. Diagnostics go to
standard error; data and reports go to the named output file or standard
output.

Exit codes: 0 success, 1 usage error, 2 data or format error, 3 network
error. Set FEATSTREAM_LOG to error, info, or debug to control logging.
"""

from __future__ import annotations

import argparse
import logging
import os
import signal
import sys
import threading
from pathlib import Path

from . import bench as bench_mod
from .bitstream import decode_tensor, encode_tensor, parse_header
from .codecs import ALL_CODECS, CodecParams, parse_codec
from .container import MAGIC as FTC_MAGIC
from .container import load_container, save_container
from .errors import FeatstreamError, ProtocolError, TransportError
from .quant import MAX_BITS, MIN_BITS
from .registry import lookup_profile
from .tensor import Category, FeatureMeta, compute_stats, generate_synthetic
from .transport import EdgeServer, FeatureStore, request_feature

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NETWORK = 3

log = logging.getLogger("featstream.cli")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; this CLI reserves 2 for data errors.
    def error(self, message):
        raise _UsageError(message)


def _codec_arg(text: str):
    try:
        return parse_codec(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _codec_list_arg(text: str):
    return tuple(_codec_arg(part) for part in text.split(","))


def _shape_arg(text: str):
    try:
        dims = tuple(int(part) for part in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad shape {text!r}, expected like 14x14x512") from None
    if len(dims) not in (1, 3) or any(d <= 0 for d in dims):
        raise argparse.ArgumentTypeError(f"shape must be HxWxC or a single extent, got {text!r}")
    return dims


def _endpoint_arg(text: str):
    host, sep, port = text.rpartition(":")
    if not sep or not host:
        raise argparse.ArgumentTypeError(f"bad endpoint {text!r}, expected host:port")
    try:
        return host, int(port)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad port in {text!r}") from None


def _quant_bits_arg(text: str):
    try:
        bits = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad bit depth {text!r}") from None
    if bits != 0 and not MIN_BITS <= bits <= MAX_BITS:
        raise argparse.ArgumentTypeError(
            f"quant bits must be 0 (lossless) or {MIN_BITS}..{MAX_BITS}"
        )
    return bits


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="featstream",
        description="Containers, codecs, benchmarks, and a fetch protocol for feature tensors.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("compress", help="compress a container into a frame")
    p.add_argument("input", type=Path, metavar="in.ftc")
    p.add_argument("output", type=Path, metavar="out.fdf")
    p.add_argument("--codec", type=_codec_arg, default=parse_codec("gzip"))
    p.add_argument("--level", type=int, default=None, help="backend effort level")
    p.add_argument("--quant-bits", type=_quant_bits_arg, default=0,
                   help="0 keeps values exact; 2..16 quantizes")

    p = sub.add_parser("decompress", help="reconstruct a container from a frame")
    p.add_argument("input", type=Path, metavar="in.fdf")
    p.add_argument("output", type=Path, metavar="out.ftc")

    p = sub.add_parser("inspect", help="print the header fields of a container or frame")
    p.add_argument("input", type=Path, metavar="file")

    p = sub.add_parser("gen", help="write a synthetic sparse container")
    p.add_argument("output", type=Path, metavar="out.ftc")
    p.add_argument("--shape", type=_shape_arg, required=True, help="HxWxC or a single extent")
    p.add_argument("--nonzero", type=float, required=True, help="target non-zero fraction")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--network", default="synthetic")
    p.add_argument("--layer", default="synthetic")
    p.add_argument("--source", default="", help="sample identifier stored in the meta")

    p = sub.add_parser("bench", help="benchmark codecs over a directory of containers")
    p.add_argument("input", type=Path, metavar="dir")
    p.add_argument("output", type=Path, nargs="?", default=None,
                   help="report file; omit for standard output")
    p.add_argument("--codecs", type=_codec_list_arg,
                   default=tuple(ALL_CODECS), help="comma-separated codec names")
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--format", choices=("csv", "md"), default="csv")

    p = sub.add_parser("serve", help="serve a directory of containers to fetch clients")
    p.add_argument("--store", type=Path, required=True)
    p.add_argument("--listen", type=_endpoint_arg, default=("127.0.0.1", 0),
                   metavar="host:port")

    p = sub.add_parser("fetch", help="fetch one feature from a serve endpoint")
    p.add_argument("output", type=Path, metavar="out.ftc")
    p.add_argument("--endpoint", type=_endpoint_arg, required=True, metavar="host:port")
    p.add_argument("--network", required=True)
    p.add_argument("--layer", required=True)
    p.add_argument("--source", default="")
    p.add_argument("--codec", type=_codec_arg, default=parse_codec("gzip"))
    p.add_argument("--quant-bits", type=_quant_bits_arg, default=0)
    return parser


def _cmd_compress(args) -> int:
    t = load_container(args.input)
    params = CodecParams(level=args.level, inner=CodecParams(level=args.level))
    frame = encode_tensor(t, args.codec, params=params, quant=args.quant_bits or None)
    args.output.write_bytes(frame)
    log.info("wrote %s: %d bytes from %d", args.output, len(frame), t.volume_bytes)
    return EXIT_OK


def _cmd_decompress(args) -> int:
    t = decode_tensor(args.input.read_bytes())
    save_container(t, args.output)
    log.info("wrote %s: %d elements", args.output, t.num_elements)
    return EXIT_OK


def _cmd_inspect(args) -> int:
    blob = args.input.read_bytes()
    out = []
    if blob[:4] == FTC_MAGIC:
        t = load_container(args.input)
        stats = compute_stats(t)
        out += [
            "format: FTC1 container",
            f"network: {t.meta.network}",
            f"layer: {t.meta.layer}",
            f"source: {t.meta.source_id}",
            f"category: {t.meta.category.name}",
            f"dims: {'x'.join(map(str, t.dims))}",
            f"payloadLen: {t.volume_bytes}",
            f"nonZeroRate: {stats.non_zero_rate:.6g}",
            f"minVal: {stats.min_val:.6g}",
            f"maxVal: {stats.max_val:.6g}",
        ]
    else:
        h = parse_header(blob)
        out += [
            "format: FDF1 frame",
            f"network: {h.meta.network}",
            f"layer: {h.meta.layer}",
            f"source: {h.meta.source_id}",
            f"category: {h.category.name}",
            f"dims: {'x'.join(map(str, h.dims))}",
            f"codec: {h.codec}",
            f"mode: {h.mode.name}",
            f"originalLen: {h.original_len}",
            f"compressedLen: {h.compressed_len}",
            f"headerLen: {h.header_bytes}",
            f"payloadRate: {h.payload_rate:.6g}",
            f"streamRate: {h.stream_rate:.6g}",
        ]
        if h.quant is not None:
            out += [
                f"quantBits: {h.quant.bits}",
                f"quantMin: {h.quant.min_val:.6g}",
                f"quantMax: {h.quant.max_val:.6g}",
            ]
    print("\n".join(out))
    return EXIT_OK


def _cmd_gen(args) -> int:
    category = Category.FC if len(args.shape) == 1 else Category.CONV
    profile = lookup_profile(args.network, args.layer)
    if profile is not None and profile.dims == args.shape:
        category = profile.category
    meta = FeatureMeta(
        network=args.network, layer=args.layer, category=category, source_id=args.source
    )
    try:
        t = generate_synthetic(args.shape, args.nonzero, seed=args.seed, meta=meta)
    except ValueError as exc:
        raise _UsageError(str(exc)) from None
    save_container(t, args.output)
    log.info("wrote %s: %s, nonzero %.4f", args.output, args.shape, args.nonzero)
    return EXIT_OK


def _cmd_bench(args) -> int:
    if not args.input.is_dir():
        raise FileNotFoundError(f"{args.input} is not a directory")
    paths = sorted(p for p in args.input.iterdir() if p.is_file())
    records = bench_mod.run_benchmark(paths, args.codecs, repeat=args.repeat)
    rows = bench_mod.aggregate(records)
    fmt = "markdown" if args.format == "md" else "csv"
    report = bench_mod.emit_report(rows, format=fmt)
    if args.output is None:
        sys.stdout.write(report)
    else:
        args.output.write_text(report, encoding="utf-8")
        log.info("wrote %s: %d aggregate rows", args.output, len(rows))
    return EXIT_OK


def _cmd_serve(args) -> int:
    host, port = args.listen
    store = FeatureStore(args.store)
    try:
        server = EdgeServer(store, host=host, port=port)
    except OSError as exc:
        raise TransportError(f"cannot listen on {host}:{port}: {exc}") from exc
    bound_host, bound_port = server.address
    print(f"serving {len(server.store)} features on {bound_host}:{bound_port}", file=sys.stderr)

    def stop(_signum, _frame):
        # shutdown() must run off the serving thread; serve_forever returns after it.
        threading.Thread(target=server.shutdown, daemon=True).start()

    signal.signal(signal.SIGINT, stop)
    signal.signal(signal.SIGTERM, stop)
    server.serve_forever()
    return EXIT_OK


def _cmd_fetch(args) -> int:
    host, port = args.endpoint
    t, stats = request_feature(
        host,
        port,
        network=args.network,
        layer=args.layer,
        source_id=args.source,
        codec=args.codec,
        quant_bits=args.quant_bits,
    )
    save_container(t, args.output)
    print(
        f"fetched {args.network}/{args.layer}: {stats.wire_bytes} wire bytes "
        f"for {t.volume_bytes} raw in {stats.elapsed_seconds:.4f}s",
        file=sys.stderr,
    )
    return EXIT_OK


_COMMANDS = {
    "compress": _cmd_compress,
    "decompress": _cmd_decompress,
    "inspect": _cmd_inspect,
    "gen": _cmd_gen,
    "bench": _cmd_bench,
    "serve": _cmd_serve,
    "fetch": _cmd_fetch,
}


def _configure_logging() -> None:
    level_name = os.environ.get("FEATSTREAM_LOG", "error").lower()
    level = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}.get(
        level_name, logging.ERROR
    )
    logging.basicConfig(level=level, stream=sys.stderr, format="%(name)s: %(message)s")


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return _COMMANDS[args.subcommand](args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TransportError, ProtocolError) as exc:
        print(f"network error: {exc}", file=sys.stderr)
        return EXIT_NETWORK
    except (FeatstreamError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except KeyboardInterrupt:
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
