"""Batch export of intermediate activations to container files.

One container per (image, layer), named {network}_{layer}_{stem}.ftc,
plus a manifest.csv listing every file with its measured non-zero rate.
Every write is atomic and every capture is checked against the expected
shape table before anything lands on disk.
"""

from __future__ import annotations

import csv
import logging
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .capture import FeatureTap, build_model, build_preprocess, load_image_batch
from .containers import write_container_file
from .errors import ExportError
from .profiles import CATEGORY_FC, category_for, expected_dims, layers_for

log = logging.getLogger("featexport")

IMAGE_SUFFIXES = (".jpg", ".jpeg", ".png", ".bmp", ".webp")
MANIFEST_NAME = "manifest.csv"
MANIFEST_FIELDS = ("file", "network", "layer", "dims", "nonZeroRate")


@dataclass(frozen=True)
class ExportJob:
    network: str
    image_dir: Path
    output_dir: Path
    layers: tuple[str, ...] = ()  # empty means every exportable layer
    sample_cap: int | None = None
    pretrained: bool = True

    def resolved_layers(self) -> tuple[str, ...]:
        known = layers_for(self.network)
        if not self.layers:
            return known
        unknown = [name for name in self.layers if name not in known]
        if unknown:
            raise ValueError(f"{self.network} has no exportable layer(s) {unknown}")
        return self.layers

    def validate(self) -> None:
        self.resolved_layers()
        if self.sample_cap is not None and self.sample_cap < 1:
            raise ValueError(f"sample cap must be positive, got {self.sample_cap}")
        if not Path(self.image_dir).is_dir():
            raise ExportError(f"image directory {self.image_dir} does not exist")


def list_images(image_dir: Path, cap: int | None = None) -> list[Path]:
    paths = sorted(
        p for p in Path(image_dir).iterdir()
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    )
    return paths[:cap] if cap else paths


def _check_capture(job: ExportJob, layer: str, values: np.ndarray) -> None:
    want = expected_dims(job.network, layer)
    if values.shape != want:
        raise ExportError(
            f"{job.network}/{layer} captured shape {values.shape}, expected {want}; "
            f"the tap is wrong, refusing to write"
        )
    if category_for(layer) != CATEGORY_FC and float(values.min(initial=0.0)) < 0.0:
        raise ExportError(
            f"{job.network}/{layer} has negative values; capture is not post-activation"
        )


def export_features(job: ExportJob, model: torch.nn.Module | None = None) -> Path:
    """Run the job; returns the manifest path.

    ``model`` overrides the zoo build, which tests use to run with random
    weights instead of downloading.
    """
    job.validate()
    layers = job.resolved_layers()
    images = list_images(job.image_dir, job.sample_cap)
    if not images:
        raise ExportError(f"no images ({', '.join(IMAGE_SUFFIXES)}) in {job.image_dir}")

    if model is None:
        model = build_model(job.network, pretrained=job.pretrained)
    out_dir = Path(job.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    preprocess = build_preprocess()

    rows = []
    with FeatureTap(model, job.network, layers) as tap:
        for image_path in images:
            batch = load_image_batch(image_path, preprocess)
            captured = tap.collect(batch)
            for layer in layers:
                values = captured[layer]
                _check_capture(job, layer, values)
                name = f"{job.network}_{layer}_{image_path.stem}.ftc"
                write_container_file(
                    out_dir / name,
                    network=job.network,
                    layer=layer,
                    source_id=image_path.stem,
                    category=category_for(layer),
                    values=values,
                )
                non_zero = np.count_nonzero(values) / values.size
                rows.append(
                    {
                        "file": name,
                        "network": job.network,
                        "layer": layer,
                        "dims": "x".join(str(d) for d in values.shape),
                        "nonZeroRate": f"{non_zero:.6g}",
                    }
                )
            log.info("exported %d layer(s) for %s", len(layers), image_path.name)

    manifest = out_dir / MANIFEST_NAME
    fd, tmp_name = tempfile.mkstemp(dir=out_dir, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=MANIFEST_FIELDS)
            writer.writeheader()
            writer.writerows(rows)
        os.replace(tmp_name, manifest)
    except BaseException:
        os.unlink(tmp_name)
        raise
    log.info("wrote %s: %d rows", manifest, len(rows))
    return manifest
