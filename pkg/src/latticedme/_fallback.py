"""Pure numpy implementations of the hot kernels.

Mirrors the compiled module ``latticedme._core`` exactly; the arithmetic is
ordered the same way so both backends produce bit-identical output.
"""

from __future__ import annotations

import numpy as np


def fwht_inplace(a: np.ndarray) -> None:
    """Orthonormal Walsh-Hadamard transform over the last axis, in place.

    ``a`` must be C-contiguous float64 of shape (m, n) with n a power of two.
    """
    m, n = a.shape
    if n & (n - 1):
        raise ValueError(f"length {n} is not a power of two")
    h = 1
    while h < n:
        view = a.reshape(m, n // (2 * h), 2, h)
        top = view[:, :, 0, :] + view[:, :, 1, :]
        bot = view[:, :, 0, :] - view[:, :, 1, :]
        view[:, :, 0, :] = top
        view[:, :, 1, :] = bot
        h *= 2
    a *= 1.0 / np.sqrt(n)


def round_nearest(t: np.ndarray) -> np.ndarray:
    # ties on .5 break toward -inf
    return np.ceil(t - 0.5).astype(np.int64)


def round_stochastic(t: np.ndarray, u: np.ndarray) -> np.ndarray:
    base = np.floor(t)
    frac = t - base
    return (base + (u < frac)).astype(np.int64)


def round_to_residue(t: np.ndarray, residues: np.ndarray, q: int) -> np.ndarray:
    # nearest integer congruent to residues mod q; ties toward -inf
    k = np.ceil((t - residues) / q - 0.5).astype(np.int64)
    return residues.astype(np.int64) + q * k


def voronoi_candidates(t: np.ndarray, radius: float) -> np.ndarray:
    """Integer vectors whose unit cube lies within l2 distance ``radius`` of t.

    A candidate alpha qualifies when sum_i max(0, |t_i - alpha_i| - 1/2)^2
    <= radius^2.  Rows come back in lexicographic order.
    """
    d = t.shape[0]
    if not np.all(np.isfinite(t)):
        raise ValueError("t must be finite")
    if radius < 0:
        return np.empty((0, d), dtype=np.int64)
    r2 = radius * radius
    prefixes = np.zeros((1, 0), dtype=np.int64)
    sums = np.zeros(1, dtype=np.float64)
    for i in range(d):
        lo = int(np.ceil(t[i] - 0.5 - radius))
        hi = int(np.floor(t[i] + 0.5 + radius))
        cand = np.arange(lo, hi + 1, dtype=np.int64)
        pen = np.maximum(np.abs(t[i] - cand) - 0.5, 0.0) ** 2
        new_sums = (sums[:, None] + pen[None, :]).ravel()
        keep = new_sums <= r2
        idx_prefix = np.repeat(np.arange(prefixes.shape[0]), cand.shape[0])[keep]
        new_col = np.tile(cand, prefixes.shape[0])[keep]
        prefixes = np.concatenate(
            [prefixes[idx_prefix], new_col[:, None]], axis=1
        )
        sums = new_sums[keep]
        if prefixes.shape[0] == 0:
            return np.empty((0, d), dtype=np.int64)
    return prefixes
