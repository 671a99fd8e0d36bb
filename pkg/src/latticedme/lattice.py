"""Scaled-and-shifted cubic lattice: rounding, coloring, packing, counting.

The lattice is ``theta + s * Z^d``: every point is an integer coefficient
vector ``alpha`` embedded as ``theta + s * alpha``.  Under the sup norm its
packing and covering radii are both ``s/2``, which is what makes the cubic
instance attractive: nearest-point rounding and color-constrained decoding
are exact coordinate-wise operations.

Points of equal color under the mod-q coloring are at sup-norm distance at
least ``q * s`` from each other, so transmitting only the color word is
enough for any receiver holding a reference within ``(q-1) * s / 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import backend

Array = np.ndarray

# cap on enumeration work for the ball-counting oracle
ENUMERATION_CAP = 10_000_000


class ParameterError(ValueError):
    """Invalid lattice or codec parameter."""


class DimensionMismatchError(ValueError):
    """Vector length does not match the lattice dimension."""


class CapacityError(RuntimeError):
    """Requested enumeration exceeds the configured work cap."""


@dataclass(frozen=True)
class LatticeSpec:
    """Cubic lattice ``theta + s * Z^d``.

    The offset must lie in the fundamental cell ``[-s/2, s/2)^d`` so that
    a given grid has exactly one description.
    """

    d: int
    s: float
    theta: Array

    def __post_init__(self):
        if self.d < 1:
            raise ParameterError(f"d must be >= 1, got {self.d}")
        if not (self.s > 0 and np.isfinite(self.s)):
            raise ParameterError(f"s must be positive and finite, got {self.s}")
        theta = np.asarray(self.theta, dtype=np.float64)
        if theta.shape != (self.d,):
            raise DimensionMismatchError(
                f"theta has shape {theta.shape}, expected ({self.d},)"
            )
        if np.any(theta < -self.s / 2) or np.any(theta >= self.s / 2):
            raise ParameterError("theta must lie in [-s/2, s/2)^d")
        object.__setattr__(self, "theta", theta)

    @classmethod
    def unshifted(cls, d: int, s: float) -> "LatticeSpec":
        return cls(d, s, np.zeros(d))

    @property
    def packing_radius(self) -> float:
        """Largest r with disjoint sup-norm balls of radius r around points."""
        return self.s / 2.0

    @property
    def covering_radius(self) -> float:
        """Smallest r with sup-norm balls of radius r covering space."""
        return self.s / 2.0

    def l2_covering_radius(self) -> float:
        return self.s * np.sqrt(self.d) / 2.0

    def embed(self, alpha: Array) -> Array:
        """Coordinates of the lattice point with coefficients ``alpha``."""
        return self.theta + self.s * np.asarray(alpha, dtype=np.float64)

    def _check(self, x: Array) -> Array:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise DimensionMismatchError(
                f"vector has shape {x.shape}, expected ({self.d},)"
            )
        return x


def nearest_point(x: Array, spec: LatticeSpec) -> Array:
    """Coefficients of the lattice point nearest to x in sup norm.

    Coordinate ties (x exactly between two grid planes) break toward -inf;
    the result is deterministic.
    """
    x = spec._check(x)
    t = (x - spec.theta) / spec.s
    return backend.round_nearest(t)


def randomized_round(x: Array, spec: LatticeSpec, rng: np.random.Generator) -> Array:
    """Unbiased randomized rounding to the surrounding cell corners.

    Each coordinate independently rounds up with probability equal to its
    fractional position, so the embedded expectation equals x exactly.
    """
    x = spec._check(x)
    t = (x - spec.theta) / spec.s
    u = rng.random(spec.d)
    return backend.round_stochastic(t, u)


@dataclass(frozen=True)
class ColorWord:
    """Residues mod q of a coefficient vector, plus the packed wire form.

    Packing is big-endian mixed radix: the first coordinate is the most
    significant base-q digit.  The packed width is always
    ``ceil(d * log2(q))`` bits regardless of the residue values.
    """

    residues: Array
    q: int

    def __post_init__(self):
        if self.q < 2:
            raise ParameterError(f"q must be >= 2, got {self.q}")
        res = np.asarray(self.residues, dtype=np.int64)
        if res.ndim != 1 or res.shape[0] < 1:
            raise DimensionMismatchError("residues must be a non-empty vector")
        if np.any(res < 0) or np.any(res >= self.q):
            raise ParameterError("residues must lie in [0, q)")
        object.__setattr__(self, "residues", res)

    @property
    def d(self) -> int:
        return int(self.residues.shape[0])

    @property
    def packed(self) -> int:
        return pack_residues(self.residues, self.q)

    @property
    def bit_length(self) -> int:
        return payload_bits(self.d, self.q)

    @classmethod
    def from_packed(cls, value: int, q: int, d: int) -> "ColorWord":
        return cls(unpack_residues(value, q, d), q)


def payload_bits(d: int, q: int) -> int:
    """Exact ``ceil(d * log2(q))`` via integer arithmetic."""
    if d < 1 or q < 2:
        raise ParameterError(f"need d >= 1 and q >= 2, got d={d}, q={q}")
    return (q**d - 1).bit_length()


def pack_residues(residues: Array, q: int) -> int:
    value = 0
    for r in np.asarray(residues, dtype=np.int64):
        value = value * q + int(r)
    return value


def unpack_residues(value: int, q: int, d: int) -> Array:
    if value < 0 or value >= q**d:
        raise ParameterError(f"packed value out of range for q={q}, d={d}")
    out = np.empty(d, dtype=np.int64)
    for i in range(d - 1, -1, -1):
        value, r = divmod(value, q)
        out[i] = r
    return out


def color_mod_q(alpha: Array, q: int) -> ColorWord:
    """Mod-q color of a coefficient vector (mathematical mod, range [0, q))."""
    alpha = np.asarray(alpha, dtype=np.int64)
    return ColorWord(np.mod(alpha, q), q)


def nearest_with_color(x_ref: Array, color: ColorWord, spec: LatticeSpec) -> Array:
    """Nearest lattice point to x_ref whose color matches, coordinate-wise.

    For the cubic lattice the constrained search is separable: in each
    coordinate the admissible coefficients form an arithmetic progression
    with step q, and the nearest term is selected directly (ties toward
    -inf).  Returns coefficients; may be silently wrong if the true point
    is out of range, which is the caller's contract to check or detect.
    """
    x_ref = spec._check(x_ref)
    if color.d != spec.d:
        raise DimensionMismatchError(
            f"color has dimension {color.d}, lattice has {spec.d}"
        )
    t = (x_ref - spec.theta) / spec.s
    return backend.round_to_residue(t, color.residues, color.q)


def count_points_in_ball(
    center: Array, radius: float, spec: LatticeSpec, norm: str = "linf"
) -> int:
    """Exact number of lattice points within ``radius`` of ``center``.

    Enumeration oracle used for geometric sanity checks; raises
    CapacityError when the bounding integer box exceeds ENUMERATION_CAP
    cells.  ``norm`` is "linf" or "l2"; balls are closed.
    """
    center = spec._check(center)
    if radius < 0:
        raise ParameterError(f"radius must be >= 0, got {radius}")
    if norm not in ("linf", "l2"):
        raise ParameterError(f"norm must be 'linf' or 'l2', got {norm!r}")
    t = (center - spec.theta) / spec.s
    r_units = radius / spec.s
    lo = np.ceil(t - r_units).astype(np.int64)
    hi = np.floor(t + r_units).astype(np.int64)
    widths = np.maximum(hi - lo + 1, 0)
    box = 1
    for w in widths:
        box *= int(w)
        if box > ENUMERATION_CAP:
            raise CapacityError(
                f"integer box of {box}+ cells exceeds cap {ENUMERATION_CAP}"
            )
    if box == 0:
        return 0
    if norm == "linf":
        # the sup-norm ball is itself a box, so the count is separable
        return box
    r2 = r_units * r_units
    sums = np.zeros(1, dtype=np.float64)
    for i in range(spec.d):
        cand = np.arange(lo[i], hi[i] + 1, dtype=np.int64)
        dist2 = (t[i] - cand) ** 2
        sums = (sums[:, None] + dist2[None, :]).ravel()
        sums = sums[sums <= r2]
        if sums.shape[0] == 0:
            return 0
    return int(sums.shape[0])
