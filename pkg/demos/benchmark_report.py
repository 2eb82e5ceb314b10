"""Run the benchmark harness over a small synthetic corpus and print reports.

Generates a few container files for two layers, measures three codecs on
them, and emits the aggregate table in both formats.
"""

import tempfile
from pathlib import Path

from featstream import Category, FeatureMeta, generate_synthetic, save_container
from featstream.bench import aggregate, emit_report, run_benchmark
from featstream.codecs import BZ2, DEFLATE_GZ, STORE, zeromask


def build_corpus(root: Path) -> list[Path]:
    paths = []
    layers = [
        ("conv5", Category.CONV, (14, 14, 512), 0.068),
        ("fc1", Category.FC, (4096,), 0.248),
    ]
    for layer, category, dims, rate in layers:
        for i in range(4):
            meta = FeatureMeta(network="vgg16", layer=layer, category=category,
                               source_id=f"img{i}")
            t = generate_synthetic(dims, rate, seed=i, meta=meta)
            path = root / f"{layer}_{i}.ftc"
            save_container(t, path)
            paths.append(path)
    return paths


def main():
    codecs = (DEFLATE_GZ, BZ2, zeromask(STORE))
    with tempfile.TemporaryDirectory() as tmp:
        paths = build_corpus(Path(tmp))
        records = run_benchmark(paths, codecs, repeat=3)
    rows = aggregate(records)

    print(emit_report(rows, format="markdown"))
    print()
    print(emit_report(rows, format="csv"))


if __name__ == "__main__":
    main()
