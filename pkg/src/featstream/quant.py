"""Uniform scalar quantization of f32 feature payloads.

Maps each element onto a regular grid of 2**bits levels spanning
[min_val, max_val], packs the level indices LSB-first into a dense bit
stream, and reconstructs by the grid midpoint rule. Reconstruction error
for in-range inputs is bounded by half a grid step plus a few float32
rounding ulps; out-of-range inputs are clamped to the nearest endpoint
first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CorruptionError
from .tensor import FeatureTensor, TensorStats

__all__ = [
    "QuantParams",
    "ErrorMetrics",
    "quantize",
    "dequantize",
    "auto_range",
    "error_bound",
    "error_metrics",
]

MIN_BITS = 2
MAX_BITS = 16


@dataclass(frozen=True)
class QuantParams:
    """Grid definition for uniform quantization.

    Endpoints are snapped to float32 on construction because they travel
    in the serialized header as f32; encoder and decoder must derive the
    identical step from the identical endpoints.
    """

    bits: int
    min_val: float
    max_val: float

    def __post_init__(self):
        if not MIN_BITS <= self.bits <= MAX_BITS:
            raise ValueError(f"bits must be in [{MIN_BITS}, {MAX_BITS}], got {self.bits}")
        lo = float(np.float32(self.min_val))
        hi = float(np.float32(self.max_val))
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError("quantization range must be finite")
        if not lo < hi:
            raise ValueError(f"need min_val < max_val, got [{self.min_val}, {self.max_val}]")
        object.__setattr__(self, "min_val", lo)
        object.__setattr__(self, "max_val", hi)

    @property
    def levels(self) -> int:
        return 1 << self.bits

    @property
    def step(self) -> float:
        return (self.max_val - self.min_val) / (self.levels - 1)

    def packed_size(self, num_elements: int) -> int:
        return (num_elements * self.bits + 7) // 8


def auto_range(stats: TensorStats, bits: int = 8) -> QuantParams:
    """Pick the tightest grid covering observed values.

    A constant payload has zero dynamic range; the interval is widened to
    one unit above the constant so the grid stays well-defined (every
    element then lands on level 0 and reconstructs exactly).
    """
    lo = float(np.float32(stats.min_val))
    hi = float(np.float32(stats.max_val))
    if lo == hi:
        hi = lo + 1.0
    return QuantParams(bits=bits, min_val=lo, max_val=hi)


def quantize(values: np.ndarray, params: QuantParams) -> bytes:
    """Map f32 values to grid indices and bit-pack them.

    Index arithmetic runs in float64 so the rounding rule
    floor((x - min)/step + 0.5) is exact for all 16-bit grids. Output is
    ceil(n*bits/8) bytes, indices in element order, LSB-first within each
    byte.
    """
    x = np.asarray(values, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise ValueError("cannot quantize an empty payload")
    if not np.isfinite(x).all():
        raise ValueError("cannot quantize non-finite values")
    clipped = np.clip(x, params.min_val, params.max_val)
    codes = np.floor((clipped - params.min_val) / params.step + 0.5)
    np.clip(codes, 0, params.levels - 1, out=codes)
    codes = codes.astype(np.uint32)

    bits = np.unpackbits(codes.view(np.uint8).reshape(-1, 4), axis=1, bitorder="little")
    return np.packbits(bits[:, : params.bits].reshape(-1), bitorder="little").tobytes()


def dequantize(packed: bytes, num_elements: int, params: QuantParams) -> np.ndarray:
    """Reconstruct f32 values from a packed index stream.

    Rejects streams of the wrong length and nonzero padding bits in the
    final byte, so a truncated or bit-flipped stream cannot decode
    silently.
    """
    if num_elements <= 0:
        raise ValueError("num_elements must be positive")
    expected = params.packed_size(num_elements)
    if len(packed) != expected:
        raise CorruptionError(
            f"quantized stream is {len(packed)} bytes, expected {expected}"
        )
    bits = np.unpackbits(np.frombuffer(packed, dtype=np.uint8), bitorder="little")
    used = num_elements * params.bits
    if bits[used:].any():
        raise CorruptionError("quantized stream padding bits are set")
    weights = (np.uint32(1) << np.arange(params.bits, dtype=np.uint32))
    codes = bits[:used].reshape(num_elements, params.bits).astype(np.uint32) @ weights
    return (params.min_val + codes.astype(np.float64) * params.step).astype("<f4")


def error_bound(params: QuantParams) -> float:
    """Worst-case |x - dequant(quantize(x))| for in-range f32 inputs.

    Half a step from rounding to the nearest grid level, plus slack for
    the float32 cast of the reconstructed value and the clip at the f32
    endpoints.
    """
    extreme = np.float32(max(abs(params.min_val), abs(params.max_val)))
    return params.step / 2 + 4.0 * float(np.spacing(extreme))


@dataclass(frozen=True)
class ErrorMetrics:
    """Distortion of a reconstruction against its original.

    ``signal_to_noise_db`` is 10*log10(mean(a^2) / MSE), reported as
    +inf for a perfect reconstruction.
    """

    max_abs_error: float
    mean_squared_error: float
    signal_to_noise_db: float


def error_metrics(original: FeatureTensor, reconstructed: FeatureTensor) -> ErrorMetrics:
    if original.dims != reconstructed.dims:
        raise ValueError(
            f"shape mismatch: {original.dims} vs {reconstructed.dims}"
        )
    a = original.values.astype(np.float64)
    b = reconstructed.values.astype(np.float64)
    diff = a - b
    mse = float(np.mean(diff * diff))
    max_err = float(np.max(np.abs(diff)))
    if mse == 0.0:
        snr = math.inf
    else:
        snr = 10.0 * math.log10(float(np.mean(a * a)) / mse)
    return ErrorMetrics(max_abs_error=max_err, mean_squared_error=mse, signal_to_noise_db=snr)
