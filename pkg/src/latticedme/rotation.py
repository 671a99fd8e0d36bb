"""Randomized orthonormal rotation via sign flips and a Walsh-Hadamard pass.

Rotating before quantization spreads any vector's energy evenly across
coordinates: with high probability the rotated sup norm is within
``2 * sqrt(ln(n d) / d)`` of the l2 norm (times it), which lets sup-norm
distance budgets be set from l2 quantities.  The transform is orthonormal,
an involution up to the sign diagonal, and both sides derive the same
diagonal from the shared seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .lattice import DimensionMismatchError, ParameterError
from .randomness import SharedRandomness

Array = np.ndarray


def next_pow2(n: int) -> int:
    if n < 1:
        raise ParameterError(f"n must be >= 1, got {n}")
    return 1 << (n - 1).bit_length()


def fwht(v: Array) -> Array:
    """Orthonormal Walsh-Hadamard transform; length must be a power of two.

    Accepts a vector or a (batch, n) matrix transformed row-wise.  The
    matrix it applies has entries ``n**-0.5 * (-1)**<i, j>`` with <i, j>
    the bit inner product of the zero-based indices; applying it twice is
    the identity.
    """
    v = np.asarray(v, dtype=np.float64)
    squeeze = v.ndim == 1
    mat = np.ascontiguousarray(v.reshape(1, -1) if squeeze else v)
    if mat.ndim != 2:
        raise DimensionMismatchError("fwht expects a vector or 2-D batch")
    out = mat.copy()
    backend.fwht_inplace(out)
    return out[0] if squeeze else out


@dataclass(frozen=True)
class RotationSpec:
    """Dimension bookkeeping plus the shared sign diagonal."""

    d: int
    d_pad: int
    diag: Array

    @classmethod
    def from_seed(cls, seed: int, d: int) -> "RotationSpec":
        d_pad = next_pow2(d)
        diag = SharedRandomness(seed).sign_diagonal(d_pad)
        return cls(d, d_pad, diag)

    def sup_bound(self, n: int, l2_norm: float) -> float:
        """High-probability bound on the rotated sup norm for n vectors."""
        return 2.0 * np.sqrt(np.log(n * self.d_pad) / self.d_pad) * l2_norm


def rotate(x: Array, spec: RotationSpec) -> Array:
    """Sign-flip then transform; pads with zeros up to d_pad first."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    mat = x.reshape(1, -1) if squeeze else x
    if mat.shape[-1] != spec.d:
        raise DimensionMismatchError(
            f"input has {mat.shape[-1]} coordinates, spec.d is {spec.d}"
        )
    padded = np.zeros((mat.shape[0], spec.d_pad))
    padded[:, : spec.d] = mat
    padded *= spec.diag
    backend.fwht_inplace(padded)
    return padded[0] if squeeze else padded


def unrotate(z: Array, spec: RotationSpec) -> Array:
    """Inverse of rotate; truncates the padding back off."""
    z = np.asarray(z, dtype=np.float64)
    squeeze = z.ndim == 1
    mat = np.ascontiguousarray(z.reshape(1, -1) if squeeze else z)
    if mat.shape[-1] != spec.d_pad:
        raise DimensionMismatchError(
            f"input has {mat.shape[-1]} coordinates, spec.d_pad is {spec.d_pad}"
        )
    out = mat.copy()
    backend.fwht_inplace(out)
    out *= spec.diag
    out = out[:, : spec.d]
    return out[0] if squeeze else out
