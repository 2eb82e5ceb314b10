"""Feature tensor data model, per-tensor statistics, and the synthetic generator.

A feature tensor is one intermediate-layer activation volume: conv and pool
features are H x W x C volumes, fully connected features are flat vectors.
Values are 32-bit floats, flattened row-major (C order, dims ordered H, W, C).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import ValidationError

__all__ = [
    "Category",
    "FeatureMeta",
    "FeatureTensor",
    "TensorStats",
    "ReluGaussian",
    "Uniform",
    "compute_stats",
    "generate_synthetic",
    "nonzero_count_for_rate",
]

_F32 = np.dtype("<f4")


class Category(IntEnum):
    """Feature category; the wire encoding is the enum value."""

    CONV = 0
    POOL = 1
    FC = 2


@dataclass(frozen=True)
class FeatureMeta:
    """Provenance of a feature tensor.

    ``network`` and ``layer`` identify where the activation came from
    (e.g. "vgg16" / "conv5"); ``source_id`` names the input sample and may
    be empty. None of the text fields may contain a newline, since the
    container formats store them as one key=value line each.
    """

    network: str
    layer: str
    category: Category
    source_id: str = ""


@dataclass(eq=False)
class FeatureTensor:
    """One activation volume: extents, flat row-major f32 values, provenance."""

    dims: tuple[int, ...]
    values: np.ndarray
    meta: FeatureMeta

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.values = np.ascontiguousarray(self.values, dtype=_F32).reshape(-1)
        if not 1 <= len(self.dims) <= 4:
            raise ValidationError(f"tensor must have 1..4 dims, got {len(self.dims)}")
        if any(d <= 0 for d in self.dims):
            raise ValidationError(f"extents must be positive, got {self.dims}")
        if self.values.size != self.num_elements:
            raise ValidationError(
                f"value count {self.values.size} != product(dims) {self.num_elements}"
            )

    @property
    def num_elements(self) -> int:
        return math.prod(self.dims)

    @property
    def volume_bytes(self) -> int:
        """Size of the raw f32 payload in bytes."""
        return self.num_elements * 4

    def payload_bytes(self) -> bytes:
        """Raw little-endian f32 serialization of the values."""
        return self.values.tobytes()

    def validate(self) -> None:
        """Check every invariant that the container formats enforce.

        Raises ValidationError for non-finite elements, a category that does
        not match the dimensionality (FC features are 1-D, CONV/POOL are 3-D),
        or meta text that cannot be stored.
        """
        if not np.isfinite(self.values).all():
            raise ValidationError("tensor contains non-finite values")
        ndims = len(self.dims)
        want = 1 if self.meta.category == Category.FC else 3
        if ndims != want:
            raise ValidationError(
                f"category {self.meta.category.name} requires {want} dims, got {ndims}"
            )
        for key, text in (
            ("network", self.meta.network),
            ("layer", self.meta.layer),
            ("source", self.meta.source_id),
        ):
            if "\n" in text or "\r" in text:
                raise ValidationError(f"meta field {key!r} must not contain newlines")

    def __eq__(self, other) -> bool:
        # Bit-exact: values compared as raw bit patterns, so -0.0 != +0.0.
        if not isinstance(other, FeatureTensor):
            return NotImplemented
        return (
            self.dims == other.dims
            and self.meta == other.meta
            and self.values.tobytes() == other.values.tobytes()
        )


@dataclass(frozen=True)
class TensorStats:
    non_zero_rate: float
    min_val: float
    max_val: float
    volume_bytes: int


def compute_stats(t: FeatureTensor) -> TensorStats:
    """Per-tensor statistics: exact non-zero fraction, value range, raw size.

    The non-zero rate counts elements that compare unequal to 0.0, so a
    negative zero counts as zero.
    """
    n = t.num_elements
    nnz = int(np.count_nonzero(t.values))
    return TensorStats(
        non_zero_rate=nnz / n,
        min_val=float(t.values.min()),
        max_val=float(t.values.max()),
        volume_bytes=t.volume_bytes,
    )


@dataclass(frozen=True)
class ReluGaussian:
    """Nonzero values drawn as |N(0, sigma)|, matching post-ReLU activations."""

    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.abs(rng.normal(0.0, self.sigma, size))


@dataclass(frozen=True)
class Uniform:
    """Nonzero values drawn uniformly from [lo, hi)."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"need lo < hi, got [{self.lo}, {self.hi})")

    def draw(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size)


def nonzero_count_for_rate(rate: float, n: int) -> int:
    """Number of nonzero positions for a target rate: round(rate * n), half up."""
    return int(math.floor(rate * n + 0.5))


def generate_synthetic(
    dims,
    nonzero_rate: float,
    distribution: ReluGaussian | Uniform = ReluGaussian(1.0),
    seed: int = 0,
    meta: FeatureMeta | None = None,
) -> FeatureTensor:
    """Deterministic sparse tensor with an exact nonzero count.

    Exactly ``round(nonzero_rate * n)`` positions (chosen by a seeded
    shuffle) receive nonzero values from ``distribution``; draws that land
    on exactly 0.0 after the f32 cast are resampled, so the measured
    non-zero rate of the result equals the rounded target exactly.
    """
    if not 0.0 <= nonzero_rate <= 1.0:
        raise ValueError(f"nonzero_rate must be in [0, 1], got {nonzero_rate}")
    dims = tuple(int(d) for d in dims)
    if len(dims) not in (1, 3):
        raise ValueError(f"synthetic tensors are 1-D (fc) or 3-D (conv/pool), got {dims}")

    n = math.prod(dims)
    nnz = nonzero_count_for_rate(nonzero_rate, n)
    rng = np.random.default_rng(seed)
    positions = rng.permutation(n)[:nnz]

    values = np.zeros(n, dtype=_F32)
    if nnz:
        draws = distribution.draw(rng, nnz).astype(_F32)
        zero = draws == 0.0
        while zero.any():
            draws[zero] = distribution.draw(rng, int(zero.sum())).astype(_F32)
            zero = draws == 0.0
        values[positions] = draws

    if meta is None:
        category = Category.FC if len(dims) == 1 else Category.CONV
        meta = FeatureMeta(network="synthetic", layer="synthetic", category=category)
    return FeatureTensor(dims=dims, values=values, meta=meta)
