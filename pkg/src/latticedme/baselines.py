"""Norm-scaled quantization baselines for head-to-head comparisons.

Both baselines are unbiased stochastic quantizers whose wire cost matches
the lattice codec's per-coordinate payload at matching level counts, but
whose error scales with the *input's* norm (l2, coordinate range, or
rotated range) rather than with the distance between machines' inputs.

Formats (defined here, asserted by tests):

* sign-magnitude, l2-scaled: per coordinate one symbol out of
  ``2 * levels`` (sign plus magnitude index), plus one 64-bit scale float;
  total ``d * ceil(log2(2 * levels)) + 64`` bits.
* offset-range: per coordinate one index out of ``levels`` on an evenly
  spaced grid between the coordinate minimum and maximum, plus two 64-bit
  floats; total ``d * ceil(log2(levels)) + 128`` bits.
* rotated-uniform: rotate first, then offset-range on the padded rotated
  vector: ``d_pad * ceil(log2(levels)) + 128`` bits.

``bucket_size`` splits the vector into consecutive buckets scaled
independently (more scale floats, tighter ranges); the default is one
bucket spanning the whole vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import DimensionMismatchError, ParameterError
from .rotation import RotationSpec, rotate, unrotate

Array = np.ndarray

FLOAT_BITS = 64
NORM_MODES = ("l2", "coordinate_range")


@dataclass(frozen=True)
class BaselineParams:
    levels: int
    norm_mode: str = "l2"
    bucket_size: int | None = None

    def __post_init__(self):
        if self.levels < 2:
            raise ParameterError(f"levels must be >= 2, got {self.levels}")
        if self.norm_mode not in NORM_MODES:
            raise ParameterError(f"norm_mode must be one of {NORM_MODES}")
        if self.bucket_size is not None and self.bucket_size < 1:
            raise ParameterError(f"bucket_size must be >= 1, got {self.bucket_size}")

    def bits_per_coordinate(self) -> int:
        if self.norm_mode == "l2":
            return (2 * self.levels - 1).bit_length()
        return (self.levels - 1).bit_length()


def _buckets(d: int, size: int | None):
    size = d if size is None else size
    for start in range(0, d, size):
        yield start, min(start + size, d)


def _stochastic_index(u: Array, levels: int, rng: np.random.Generator) -> Array:
    """Unbiased index on the grid {j / (levels-1)}; u must lie in [0, 1]."""
    t = np.clip(u, 0.0, 1.0) * (levels - 1)
    base = np.floor(t)
    idx = base + (rng.random(u.shape) < (t - base))
    return np.minimum(idx, levels - 1).astype(np.int64)


@dataclass(frozen=True)
class QsgdMessage:
    indices: Array           # magnitude or offset level per coordinate
    signs: Array | None      # +-1 per coordinate (l2 mode only)
    scales: tuple            # per-bucket scale floats
    bit_length: int


def qsgd_encode(x: Array, params: BaselineParams, rng: np.random.Generator) -> QsgdMessage:
    x = np.asarray(x, dtype=np.float64)
    d = x.shape[0]
    indices = np.empty(d, dtype=np.int64)
    signs = np.empty(d, dtype=np.int64) if params.norm_mode == "l2" else None
    scales = []
    for a, b in _buckets(d, params.bucket_size):
        seg = x[a:b]
        if params.norm_mode == "l2":
            scale = float(np.linalg.norm(seg))
            u = np.abs(seg) / scale if scale > 0 else np.zeros_like(seg)
            indices[a:b] = _stochastic_index(u, params.levels, rng)
            signs[a:b] = np.where(seg < 0, -1, 1)
            scales.append(scale)
        else:
            lo = float(seg.min())
            span = float(seg.max()) - lo
            u = (seg - lo) / span if span > 0 else np.zeros_like(seg)
            indices[a:b] = _stochastic_index(u, params.levels, rng)
            scales.extend((lo, span))
    n_buckets = len(list(_buckets(d, params.bucket_size)))
    floats = n_buckets if params.norm_mode == "l2" else 2 * n_buckets
    bit_length = d * params.bits_per_coordinate() + floats * FLOAT_BITS
    return QsgdMessage(indices, signs, tuple(scales), bit_length)


def qsgd_decode(msg: QsgdMessage, params: BaselineParams, d: int) -> Array:
    out = np.empty(d, dtype=np.float64)
    grid = msg.indices / (params.levels - 1)
    si = iter(msg.scales)
    for a, b in _buckets(d, params.bucket_size):
        if params.norm_mode == "l2":
            scale = next(si)
            out[a:b] = msg.signs[a:b] * grid[a:b] * scale
        else:
            lo, span = next(si), next(si)
            out[a:b] = lo + grid[a:b] * span
    return out


@dataclass(frozen=True)
class RotatedUniformMessage:
    indices: Array           # level per rotated coordinate (d_pad,)
    lo: float
    hi: float
    bit_length: int


def hadamard_uniform_encode(
    x: Array, params: BaselineParams, spec: RotationSpec, rng: np.random.Generator
) -> RotatedUniformMessage:
    v = rotate(np.asarray(x, dtype=np.float64), spec)
    lo = float(v.min())
    hi = float(v.max())
    span = hi - lo
    u = (v - lo) / span if span > 0 else np.zeros_like(v)
    indices = _stochastic_index(u, params.levels, rng)
    bit_length = spec.d_pad * (params.levels - 1).bit_length() + 2 * FLOAT_BITS
    return RotatedUniformMessage(indices, lo, hi, bit_length)


def hadamard_uniform_decode(
    msg: RotatedUniformMessage, params: BaselineParams, spec: RotationSpec
) -> Array:
    if msg.indices.shape[0] != spec.d_pad:
        raise DimensionMismatchError(
            f"message has {msg.indices.shape[0]} coordinates, spec.d_pad is {spec.d_pad}"
        )
    v = msg.lo + (msg.hi - msg.lo) * (msg.indices / (params.levels - 1))
    return unrotate(v, spec)
