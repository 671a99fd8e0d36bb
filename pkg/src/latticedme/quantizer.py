"""Color-word vector codec over the cubic lattice.

An encoder rounds its input to a lattice point and transmits only the
point's mod-q color word; a decoder holding any reference vector within
the scheme's distance budget recovers the exact same point.  Error then
scales with the side length ``s = 2y / (q - 1)``, i.e. with the distance
budget ``y`` between encoder and decoder inputs, never with the input
norm.

Two encoder modes:

* ``shared_offset``: the grid offset is drawn per round from shared
  randomness (both sides derive it, nothing is transmitted), the encoder
  rounds to the nearest point.  Deterministic given (seed, round);
  unbiased over the offset draw; per-coordinate error at most s/2;
  decoding is exact whenever ``|x - x_ref|_inf <= (q-1)s/2``.
* ``stochastic_hull``: zero offset, per-coordinate randomized rounding
  (up with probability equal to the fractional position).  Unbiased over
  the rounding draws; per-coordinate error strictly below s; decoding is
  exact whenever ``|x - x_ref|_inf <= (q-2)s/2`` minus the rounding
  slack.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import (
    ColorWord,
    DimensionMismatchError,
    LatticeSpec,
    ParameterError,
    color_mod_q,
    nearest_point,
    nearest_with_color,
    payload_bits,
    randomized_round,
)
from .randomness import SharedRandomness

Array = np.ndarray

MODES = ("shared_offset", "stochastic_hull")


@dataclass(frozen=True)
class QuantParams:
    """Codec parameters: modulus q, distance budget y, dimension, seed."""

    q: int
    y: float
    d: int
    round_seed: int
    mode: str = "shared_offset"

    def __post_init__(self):
        if self.q < 2:
            raise ParameterError(f"q must be >= 2, got {self.q}")
        if not (self.y > 0 and np.isfinite(self.y)):
            raise ParameterError(f"y must be positive and finite, got {self.y}")
        if self.d < 1:
            raise ParameterError(f"d must be >= 1, got {self.d}")
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}, got {self.mode!r}")

    @property
    def s(self) -> float:
        """Side length; chosen so the shared_offset decode budget equals y."""
        return 2.0 * self.y / (self.q - 1)

    @property
    def bit_length(self) -> int:
        return payload_bits(self.d, self.q)

    def decode_threshold(self) -> float:
        """Largest guaranteed-safe encoder/decoder input distance (sup norm)."""
        if self.mode == "shared_offset":
            return (self.q - 1) * self.s / 2.0
        return (self.q - 2) * self.s / 2.0

    def lattice_spec(self, round_index: int) -> LatticeSpec:
        if self.mode == "shared_offset":
            theta = SharedRandomness(self.round_seed).offset(round_index, self.d, self.s)
        else:
            theta = np.zeros(self.d)
        return LatticeSpec(self.d, self.s, theta)


@dataclass(frozen=True)
class EncodedVector:
    """Wire form of one encoded vector.

    ``payload`` is the packed big-endian mixed-radix color word;
    ``bit_length`` is always exactly ``ceil(d * log2(q))``.
    """

    payload: int
    bit_length: int
    round_index: int

    def to_bytes(self) -> bytes:
        n = (self.bit_length + 7) // 8
        return self.payload.to_bytes(n, "big")

    @classmethod
    def from_bytes(cls, raw: bytes, bit_length: int, round_index: int) -> "EncodedVector":
        return cls(int.from_bytes(raw, "big"), bit_length, round_index)


def quantize(
    x: Array,
    params: QuantParams,
    round_index: int,
    rng: np.random.Generator | None = None,
) -> Array:
    """The lattice point (coefficients) the encoder commits to.

    ``rng`` is required in stochastic_hull mode and ignored otherwise.
    """
    spec = params.lattice_spec(round_index)
    if params.mode == "shared_offset":
        return nearest_point(x, spec)
    if rng is None:
        raise ParameterError("stochastic_hull mode requires an rng")
    return randomized_round(x, spec, rng)


def encode_alpha(alpha: Array, params: QuantParams, round_index: int) -> EncodedVector:
    word = color_mod_q(alpha, params.q)
    return EncodedVector(word.packed, word.bit_length, round_index)


def encode(
    x: Array,
    params: QuantParams,
    round_index: int,
    rng: np.random.Generator | None = None,
) -> EncodedVector:
    return encode_alpha(quantize(x, params, round_index, rng), params, round_index)


def decode_alpha(
    msg: EncodedVector, x_ref: Array, params: QuantParams, round_index: int
) -> Array:
    """Coefficients of the nearest matching-color point to the reference.

    Exact recovery of the encoder's point is guaranteed only within the
    mode's decode threshold; beyond it the result is silently wrong by
    design (the error-detecting layer exists for that case).
    """
    if msg.bit_length != params.bit_length:
        raise ParameterError(
            f"message has {msg.bit_length} bits, params require {params.bit_length}"
        )
    spec = params.lattice_spec(round_index)
    word = ColorWord.from_packed(msg.payload, params.q, params.d)
    return nearest_with_color(x_ref, word, spec)


def decode(
    msg: EncodedVector, x_ref: Array, params: QuantParams, round_index: int
) -> Array:
    """Decoded vector (the embedded lattice point)."""
    spec = params.lattice_spec(round_index)
    return spec.embed(decode_alpha(msg, x_ref, params, round_index))


@dataclass(frozen=True)
class RoundtripStats:
    """Monte Carlo round-trip summary over fresh rounds."""

    trials: int
    bias: Array          # per-coordinate mean decoded-minus-input
    mse: float           # mean squared l2 error
    max_abs_error: float # worst sup-norm error observed
    mismatches: int      # decoded point differed from encoder's point


def roundtrip_error(
    x: Array,
    x_ref: Array,
    params: QuantParams,
    trials: int,
    rng: np.random.Generator | None = None,
    round_base: int = 0,
) -> RoundtripStats:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.d,):
        raise DimensionMismatchError(f"x has shape {x.shape}, expected ({params.d},)")
    err_sum = np.zeros(params.d)
    sq_sum = 0.0
    max_abs = 0.0
    mismatches = 0
    for t in range(trials):
        r = round_base + t
        alpha = quantize(x, params, r, rng)
        msg = encode_alpha(alpha, params, r)
        got = decode_alpha(msg, x_ref, params, r)
        if not np.array_equal(got, alpha):
            mismatches += 1
        err = params.lattice_spec(r).embed(got) - x
        err_sum += err
        sq_sum += float(err @ err)
        max_abs = max(max_abs, float(np.max(np.abs(err))))
    return RoundtripStats(
        trials=trials,
        bias=err_sum / trials,
        mse=sq_sum / trials,
        max_abs_error=max_abs,
        mismatches=mismatches,
    )
