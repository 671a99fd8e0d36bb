"""Constant-bits-per-round regime: transmit a random color, not a color word.

Instead of residues for every coordinate, the encoder shifts the lattice
by a fresh uniform offset, rounds, and sends only a short random color of
the rounded point plus the iteration index.  The color space is the
composition of a coordinate-wise mod coloring (which already separates
any two points whose expanded regions overlap) with a keyed hash drawn
fresh each iteration.  An iteration succeeds when the rounded point's
color is unique among all points whose expanded region covers the
shifted input; failures re-draw offset and hash.

Everything here is the exact small-dimension instance: regions are
enumerated, no sampling approximations.  Guards keep the enumeration at
desk scale (d <= 12, q <= 4).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import backend
from .lattice import DimensionMismatchError, ParameterError
from .randomness import SUBLINEAR_COLOR, SUBLINEAR_OFFSET, SharedRandomness, int_vector_bytes, keyed_hash_bits

Array = np.ndarray

MAX_EXACT_D = 12
MAX_EXACT_Q = 4.0
ITERATION_FIELD_BITS = 8


class DecodeFailureError(RuntimeError):
    """No unique color-matching point in the decoder's search region."""


class IterationCapError(RuntimeError):
    """Encoder exhausted its iteration budget without a unique color."""


@dataclass(frozen=True)
class SublinearParams:
    """Exact-mode parameters.

    ``epsilon`` is the packing radius in l2 units, so the cube side is
    ``2 * epsilon``; ``q`` scales both the expanded-region radius
    (2 q epsilon) and the decoder's search ball (q epsilon).
    """

    q: float
    epsilon: float
    d: int
    seed: int
    max_iterations: int = 64

    def __post_init__(self):
        if not (0 < self.q <= MAX_EXACT_Q):
            raise ParameterError(f"exact mode requires 0 < q <= {MAX_EXACT_Q}, got {self.q}")
        if not (self.epsilon > 0 and np.isfinite(self.epsilon)):
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if not 1 <= self.d <= MAX_EXACT_D:
            raise ParameterError(f"exact mode requires 1 <= d <= {MAX_EXACT_D}, got {self.d}")
        if not 1 <= self.max_iterations <= 2**ITERATION_FIELD_BITS:
            raise ParameterError(
                f"max_iterations must be in [1, {2**ITERATION_FIELD_BITS}], got {self.max_iterations}"
            )

    @property
    def s(self) -> float:
        return 2.0 * self.epsilon

    @property
    def color_bits(self) -> int:
        return math.ceil(3.0 * self.d * math.log2(1.0 + 2.0 * self.q))

    @property
    def mod_base(self) -> int:
        # coordinate-wise stage of the coloring; classes this far apart
        # can never share an expanded region
        return math.ceil(3.0 + 2.0 * self.q)

    @property
    def bit_length(self) -> int:
        return self.color_bits + ITERATION_FIELD_BITS

    def failure_bound(self) -> float:
        """Per-iteration failure probability bound: 2 * (1+2q)^-d."""
        return 2.0 * (1.0 + 2.0 * self.q) ** (-self.d)


@dataclass(frozen=True)
class SublinearMessage:
    color: int
    iteration: int
    bit_length: int


def _offset(params: SublinearParams, round_index: int, iteration: int) -> Array:
    stream = SharedRandomness(params.seed).stream(SUBLINEAR_OFFSET, round_index, iteration)
    return stream.uniform(-params.s / 2.0, params.s / 2.0, params.d)


def _iteration_key(params: SublinearParams, round_index: int, iteration: int) -> bytes:
    return SharedRandomness(params.seed).hash_key(SUBLINEAR_COLOR, round_index, iteration)


def _color_with_key(class_id: Array, params: SublinearParams, key: bytes) -> int:
    return keyed_hash_bits(int_vector_bytes(class_id), key, params.color_bits)


def _color_of(alpha: Array, params: SublinearParams, round_index: int, iteration: int) -> int:
    key = _iteration_key(params, round_index, iteration)
    class_id = np.mod(np.asarray(alpha, dtype=np.int64), params.mod_base)
    return _color_with_key(class_id, params, key)


def covering_region_count(x: Array, params: SublinearParams, round_index: int, iteration: int) -> int:
    """How many points' expanded regions contain the shifted input."""
    x = _check_vec(x, params)
    t = (x + _offset(params, round_index, iteration)) / params.s
    return int(backend.voronoi_candidates(t, params.q).shape[0])


def _check_vec(x: Array, params: SublinearParams) -> Array:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.d,):
        raise DimensionMismatchError(f"vector has shape {x.shape}, expected ({params.d},)")
    return x


def sublinear_encode(x: Array, params: SublinearParams, round_index: int) -> SublinearMessage:
    """Iterate until the rounded point's color is unique; emit (color, i)."""
    x = _check_vec(x, params)
    width = 8 * params.d
    for i in range(params.max_iterations):
        theta = _offset(params, round_index, i)
        t = (x + theta) / params.s
        z = backend.round_nearest(t)
        candidates = backend.voronoi_candidates(t, params.q)
        # the per-iteration key is shared by every candidate; hash one
        # contiguous buffer of class rows instead of row-by-row arrays
        key = _iteration_key(params, round_index, i)
        raw = np.ascontiguousarray(
            np.mod(candidates, params.mod_base), dtype="<i8"
        ).tobytes()
        is_z = np.all(candidates == z, axis=1)
        z_color = _color_with_key(np.mod(z, params.mod_base), params, key)
        unique = True
        for j in range(candidates.shape[0]):
            if is_z[j]:
                continue
            color = keyed_hash_bits(raw[j * width:(j + 1) * width], key, params.color_bits)
            if color == z_color:
                unique = False
                break
        if unique:
            return SublinearMessage(color=z_color, iteration=i, bit_length=params.bit_length)
    raise IterationCapError(
        f"no unique color in {params.max_iterations} iterations"
    )


def sublinear_decode(msg: SublinearMessage, x_ref: Array, params: SublinearParams, round_index: int) -> Array:
    """Search the l2 ball of radius q*epsilon around the shifted reference.

    Among lattice points whose cube intersects that ball, exactly one may
    match the transmitted color; its embedded position minus the offset is
    the estimate.  Zero or multiple matches raise DecodeFailureError.
    """
    x_ref = _check_vec(x_ref, params)
    theta = _offset(params, round_index, msg.iteration)
    t_ref = (x_ref + theta) / params.s
    candidates = backend.voronoi_candidates(t_ref, params.q / 2.0)
    key = _iteration_key(params, round_index, msg.iteration)
    classes = np.mod(candidates, params.mod_base)
    matches = [
        cand
        for cand, cls in zip(candidates, classes)
        if _color_with_key(cls, params, key) == msg.color
    ]
    if len(matches) != 1:
        raise DecodeFailureError(
            f"{len(matches)} color matches in the search region (need exactly 1)"
        )
    return params.s * np.asarray(matches[0], dtype=np.float64) - theta


@dataclass(frozen=True)
class VarianceSim:
    bits_per_coordinate: float
    s: float
    variance: float


def sublinear_variance_sim(y: float, d: int, bits_per_coordinate: float) -> VarianceSim:
    """Side length and variance prediction at a fractional bit budget.

    Solves ``log2(1 + 4 y / s) = bits_per_coordinate`` for s and reports
    the uniform-cell variance ``d * s**2 / 12``.
    """
    if not (y > 0 and np.isfinite(y)):
        raise ParameterError(f"y must be positive, got {y}")
    if d < 1:
        raise ParameterError(f"d must be >= 1, got {d}")
    if not (bits_per_coordinate > 0):
        raise ParameterError(f"bits_per_coordinate must be positive, got {bits_per_coordinate}")
    s = 4.0 * y / (2.0**bits_per_coordinate - 1.0)
    return VarianceSim(bits_per_coordinate, s, d * s * s / 12.0)
