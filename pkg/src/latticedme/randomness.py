"""Deterministic shared randomness derived from a single master seed.

Every coordinated random quantity in the library (lattice offsets, rotation
sign flips, checksum keys, leader election, tree shapes, stochastic rounding
streams) is derived from ``(seed, purpose, indices...)`` through a
counter-based generator.  Simulated machines that hold the same seed thus
compute identical values with zero communication, and re-running any
component with the same seed reproduces it bit for bit.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK = (1 << 64) - 1

# purpose tags; distinct values keep the derived streams disjoint
OFFSET = 1
ROTATION = 2
CHECKSUM = 3
LEADER = 4
TREE = 5
STOCH = 6
SUBLINEAR_OFFSET = 7
SUBLINEAR_COLOR = 8
DATA = 9
BASELINE = 10
INIT = 11


@dataclass(frozen=True)
class SharedRandomness:
    """Handle for deriving independent named streams from one seed."""

    seed: int

    def stream(self, purpose: int, *indices: int) -> np.random.Generator:
        """Counter-based generator keyed by (seed, purpose, indices)."""
        entropy = [self.seed & _MASK, purpose & _MASK]
        entropy.extend(i & _MASK for i in indices)
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))

    def offset(self, round_index: int, d: int, s: float) -> np.ndarray:
        """Lattice offset for one round, uniform over [-s/2, s/2)^d."""
        return self.stream(OFFSET, round_index).uniform(-s / 2.0, s / 2.0, d)

    def sign_diagonal(self, d_pad: int) -> np.ndarray:
        """Rademacher +-1 diagonal used by the rotation; fixed per seed."""
        bits = self.stream(ROTATION).integers(0, 2, d_pad)
        return (2.0 * bits - 1.0).astype(np.float64)

    def hash_key(self, purpose: int, *indices: int) -> bytes:
        """16-byte key for keyed hashing, fresh per (purpose, indices)."""
        return self.stream(purpose, *indices).bytes(16)

    def leader(self, n: int, round_index: int) -> int:
        return int(self.stream(LEADER, round_index).integers(n))


def keyed_hash_bits(data: bytes, key: bytes, n_bits: int) -> int:
    """First ``n_bits`` bits of a keyed BLAKE2b digest of ``data``.

    n_bits must be in [1, 256]; collisions across distinct inputs occur
    with probability 2^-n_bits for an unknown key.
    """
    if not 1 <= n_bits <= 256:
        raise ValueError(f"n_bits must be in [1, 256], got {n_bits}")
    digest_size = (n_bits + 7) // 8
    h = hashlib.blake2b(data, key=key, digest_size=digest_size)
    value = int.from_bytes(h.digest(), "big")
    return value >> (8 * digest_size - n_bits)


def int_vector_bytes(alpha: np.ndarray) -> bytes:
    """Canonical byte serialization of an integer coefficient vector."""
    return np.ascontiguousarray(alpha, dtype="<i8").tobytes()
