"""Batch compression benchmark: rates, wall times, and table-style reports.

Runs a set of codecs over a set of stored feature tensors, records the
exact compression rate and the median single-threaded wall time per
(tensor, codec), aggregates mean and sample standard deviation per
(network, layer, codec), and renders the aggregate as CSV or a markdown
table with one row per feature type and one column group per codec.
"""

from __future__ import annotations

import csv
import io
import logging
import statistics
import time
from dataclasses import dataclass
from pathlib import Path

from .codecs import CodecId, CodecParams, codec_to_byte, compress_payload
from .container import load_container
from .errors import FeatstreamError
from .tensor import FeatureTensor, compute_stats

__all__ = [
    "CompressionRecord",
    "AggregateRow",
    "compression_rate",
    "bench_tensor",
    "run_benchmark",
    "aggregate",
    "emit_report",
    "humanize_volume",
]

log = logging.getLogger("featstream.bench")


def compression_rate(compressed_len: int, original_len: int) -> float:
    """Compressed size over original size; > 1.0 means expansion."""
    if original_len <= 0:
        raise ValueError(f"original length must be positive, got {original_len}")
    if compressed_len < 0:
        raise ValueError(f"compressed length must be non-negative, got {compressed_len}")
    return compressed_len / original_len


@dataclass(frozen=True)
class CompressionRecord:
    """One (tensor, codec) measurement."""

    network: str
    layer: str
    codec: CodecId
    sample_id: str
    dims: tuple[int, ...]
    compression_rate: float
    wall_time_seconds: float
    non_zero_rate: float


@dataclass(frozen=True)
class AggregateRow:
    """Mean and sample std over one (network, layer, codec) group."""

    network: str
    layer: str
    codec: CodecId
    dims: tuple[int, ...]
    count: int
    mean_rate: float
    std_rate: float
    mean_time: float
    std_time: float
    mean_non_zero: float
    std_non_zero: float


def bench_tensor(
    t: FeatureTensor,
    codecs: tuple[CodecId, ...] | list[CodecId],
    repeat: int = 3,
    params: CodecParams | None = None,
    sample_id: str | None = None,
) -> list[CompressionRecord]:
    """Measure every codec on one in-memory tensor.

    Wall time is the median of ``repeat`` timings of the compression call
    alone; reading, stats, and rate arithmetic are not timed. Timings run
    back to back on the calling thread.
    """
    if repeat < 1:
        raise ValueError(f"repeat must be >= 1, got {repeat}")
    raw = t.payload_bytes()
    stats = compute_stats(t)
    if sample_id is None:
        sample_id = t.meta.source_id
    records = []
    for codec in codecs:
        timings = []
        compressed = b""
        for _ in range(repeat):
            start = time.perf_counter()
            compressed = compress_payload(raw, codec, params)
            timings.append(time.perf_counter() - start)
        records.append(
            CompressionRecord(
                network=t.meta.network,
                layer=t.meta.layer,
                codec=codec,
                sample_id=sample_id,
                dims=t.dims,
                compression_rate=compression_rate(len(compressed), len(raw)),
                wall_time_seconds=statistics.median(timings),
                non_zero_rate=stats.non_zero_rate,
            )
        )
    return records


def run_benchmark(
    paths,
    codecs: tuple[CodecId, ...] | list[CodecId],
    repeat: int = 3,
    params: CodecParams | None = None,
) -> list[CompressionRecord]:
    """Benchmark every container file in ``paths`` against every codec.

    A file that cannot be read or compressed is logged and skipped so a
    long run survives one bad input; if every file fails the run itself
    fails.
    """
    paths = [Path(p) for p in paths]
    if not paths:
        raise ValueError("no input containers given")
    records: list[CompressionRecord] = []
    failures = 0
    for path in paths:
        try:
            t = load_container(path)
            sample = t.meta.source_id or path.stem
            records.extend(bench_tensor(t, codecs, repeat, params, sample_id=sample))
        except (FeatstreamError, OSError) as exc:
            failures += 1
            log.warning("skipping %s: %s", path, exc)
    if failures == len(paths):
        raise FeatstreamError(f"all {failures} input containers failed")
    return records


def _mean_std(values: list[float]) -> tuple[float, float]:
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if len(values) > 1 else 0.0
    return mean, std


def aggregate(records: list[CompressionRecord]) -> list[AggregateRow]:
    """Collapse records to mean +- sample std per (network, layer, codec).

    Rows come out ordered by network, then layer (first appearance order),
    then codec wire byte, so report layout is deterministic.
    """
    if not records:
        raise ValueError("no records to aggregate")
    groups: dict[tuple[str, str, CodecId], list[CompressionRecord]] = {}
    for rec in records:
        groups.setdefault((rec.network, rec.layer, rec.codec), []).append(rec)

    layer_order: dict[tuple[str, str], int] = {}
    for rec in records:
        layer_order.setdefault((rec.network, rec.layer), len(layer_order))

    rows = []
    for (network, layer, codec), group in groups.items():
        dims = {rec.dims for rec in group}
        if len(dims) != 1:
            raise ValueError(
                f"group {network}/{layer} mixes tensor shapes {sorted(dims)}"
            )
        mean_rate, std_rate = _mean_std([r.compression_rate for r in group])
        mean_time, std_time = _mean_std([r.wall_time_seconds for r in group])
        mean_nz, std_nz = _mean_std([r.non_zero_rate for r in group])
        rows.append(
            AggregateRow(
                network=network,
                layer=layer,
                codec=codec,
                dims=next(iter(dims)),
                count=len(group),
                mean_rate=mean_rate,
                std_rate=std_rate,
                mean_time=mean_time,
                std_time=std_time,
                mean_non_zero=mean_nz,
                std_non_zero=std_nz,
            )
        )
    rows.sort(key=lambda r: (r.network, layer_order[(r.network, r.layer)], codec_to_byte(r.codec)))
    return rows


def humanize_volume(nbytes: int) -> str:
    """Render a byte count the way the reference tables do.

    Exact binary multiples become "392K" or "12.25M" (K at one decimal
    step, M from 2 MiB up); anything not a whole number of KiB stays a
    plain integer.
    """
    if nbytes < 1024 or nbytes % 1024:
        return str(nbytes)
    if nbytes >= 2 * 1024 * 1024:
        return f"{nbytes / (1024 * 1024):g}M"
    return f"{nbytes // 1024}K"


def _shape_text(dims: tuple[int, ...]) -> str:
    return "x".join(str(d) for d in dims)


def _report_layout(rows: list[AggregateRow]):
    """Group aggregate rows into (network, layer) report lines.

    Returns (codecs in column order, lines), each line being
    (network, layer, dims, volume, mean/std nonzero, {codec: row}).
    """
    codecs = sorted({row.codec for row in rows}, key=codec_to_byte)
    lines: dict[tuple[str, str], dict] = {}
    for row in rows:
        key = (row.network, row.layer)
        line = lines.setdefault(
            key,
            {
                "network": row.network,
                "layer": row.layer,
                "dims": row.dims,
                "non_zero": (row.mean_non_zero, row.std_non_zero),
                "cells": {},
            },
        )
        line["cells"][row.codec] = row
    return codecs, list(lines.values())


def _volume_of(dims: tuple[int, ...]) -> int:
    n = 1
    for d in dims:
        n *= d
    return n * 4


def emit_report(rows: list[AggregateRow], format: str = "markdown") -> str:
    """Render aggregate rows as text.

    CSV is the machine format: one row per (network, layer, codec), every
    mean +- std pair split into two numeric columns, six significant
    digits. Markdown is the human format: one table per network, one line
    per feature type, one column group per codec in wire-byte order,
    mirroring the reference-table layout.
    """
    if format == "csv":
        return _emit_csv(rows)
    if format == "markdown":
        return _emit_markdown(rows)
    raise ValueError(f"unknown report format {format!r}")


_CSV_HEADER = [
    "network",
    "feat_type",
    "feat_shape",
    "data_volume",
    "codec",
    "count",
    "nonzero_mean",
    "nonzero_std",
    "rate_mean",
    "rate_std",
    "time_mean",
    "time_std",
]


def _emit_csv(rows: list[AggregateRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(_CSV_HEADER)
    for row in rows:
        writer.writerow(
            [
                row.network,
                row.layer,
                _shape_text(row.dims),
                humanize_volume(_volume_of(row.dims)),
                str(row.codec),
                row.count,
                f"{row.mean_non_zero:.6g}",
                f"{row.std_non_zero:.6g}",
                f"{row.mean_rate:.6g}",
                f"{row.std_rate:.6g}",
                f"{row.mean_time:.6g}",
                f"{row.std_time:.6g}",
            ]
        )
    return out.getvalue()


def _pm(mean: float, std: float) -> str:
    return f"{mean:.3f} ± {std:.3f}"


def _emit_markdown(rows: list[AggregateRow]) -> str:
    codecs, lines = _report_layout(rows)
    networks: dict[str, list[dict]] = {}
    for line in lines:
        networks.setdefault(line["network"], []).append(line)

    chunks = []
    for network, net_lines in networks.items():
        header = ["Feat. Type", "Feat. Shape", "Data Volume", "Non-zero Rate"]
        for codec in codecs:
            header += [f"{codec} Rate", f"{codec} Time (s)"]
        widths = "|" + "|".join("---" for _ in header) + "|"
        table = [f"## {network}", "", "| " + " | ".join(header) + " |", widths]
        for line in net_lines:
            cells = line["cells"]
            record = [
                line["layer"],
                _shape_text(line["dims"]),
                humanize_volume(_volume_of(line["dims"])),
                _pm(*line["non_zero"]),
            ]
            for codec in codecs:
                cell = cells.get(codec)
                if cell is None:
                    record += ["", ""]
                else:
                    record += [_pm(cell.mean_rate, cell.std_rate), _pm(cell.mean_time, cell.std_time)]
            table.append("| " + " | ".join(record) + " |")
        chunks.append("\n".join(table))
    return "\n\n".join(chunks) + "\n"
