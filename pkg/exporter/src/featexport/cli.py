"""Command line for batch feature export.

    featexport --model vgg16 --images imgs/ --out feats/ \
        --layers conv5,fc1 --limit 50

Exit codes: 0 success, 1 usage error, 2 export or setup failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import ExportError
from .export import ExportJob, export_features
from .profiles import NETWORKS, layers_for


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="featexport",
        description="Run a torchvision model over images and write each tapped "
        "layer as an FTC1 container plus a manifest CSV.",
    )
    parser.add_argument("--model", required=True, choices=NETWORKS)
    parser.add_argument("--images", type=Path, required=True, help="directory of input images")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--layers", default="",
                        help="comma-separated layer names; default is all of them")
    parser.add_argument("--limit", type=int, default=None, help="cap on the image count")
    parser.add_argument("--random-weights", action="store_true",
                        help="skip the zoo download; features are structurally valid "
                        "but statistically meaningless")
    parser.add_argument("--list-layers", action="store_true",
                        help="print the exportable layers for --model and exit")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(name)s: %(message)s",
    )
    if args.list_layers:
        print("\n".join(layers_for(args.model)))
        return 0
    layers = tuple(name for name in args.layers.split(",") if name)
    job = ExportJob(
        network=args.model,
        image_dir=args.images,
        output_dir=args.out,
        layers=layers,
        sample_cap=args.limit,
        pretrained=not args.random_weights,
    )
    try:
        manifest = export_features(job)
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ExportError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(manifest)
    return 0


if __name__ == "__main__":
    sys.exit(main())
