"""Data generation and ingestion for the experiment harness.

Synthetic least-squares instances, a text-format sparse dataset reader,
and Gaussian row generators with a planted covariance spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..randomness import DATA, SharedRandomness

Array = np.ndarray


class DatasetFormatError(ValueError):
    """Malformed dataset file; message carries line (and column) position."""


@dataclass(frozen=True)
class LeastSquares:
    """A least-squares instance: rows A, targets b, optional planted optimum.

    Loss is the mean squared residual over rows, halved; its gradient is
    A.T (A w - b) / S.  Batch gradients over equal-sized disjoint row
    groups therefore average exactly to the full gradient.
    """

    A: Array
    b: Array
    w_star: Array | None = None

    @property
    def samples(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[1]

    def loss(self, w: Array) -> float:
        r = self.A @ w - self.b
        return float(r @ r) / (2.0 * self.samples)

    def gradient(self, w: Array) -> Array:
        return self.A.T @ (self.A @ w - self.b) / self.samples

    def batch_gradient(self, w: Array, rows: Array) -> Array:
        Ab = self.A[rows]
        return Ab.T @ (Ab @ w - self.b[rows]) / rows.shape[0]


def gen_least_squares(samples: int, d: int, seed: int) -> LeastSquares:
    """Gaussian design with planted optimum: A, w* ~ N(0,1), b = A w*."""
    if samples < 1 or d < 1:
        raise ValueError(f"need samples, d >= 1, got {samples}, {d}")
    rng = SharedRandomness(seed).stream(DATA, 0)
    A = rng.standard_normal((samples, d))
    w_star = rng.standard_normal(d)
    return LeastSquares(A, A @ w_star, w_star)


def parse_libsvm(path: str, d: int | None = None) -> tuple[Array, Array]:
    """Read `label idx:val ...` lines (1-based indices) into dense (A, b).

    Unspecified entries are zero.  Out-of-order indices are accepted;
    a duplicated index on one line is an error.  Every format problem is
    reported with its line number.
    """
    rows: list[dict[int, float]] = []
    labels: list[float] = []
    max_idx = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            parts = stripped.split()
            try:
                label = float(parts[0])
            except ValueError as exc:
                raise DatasetFormatError(
                    f"{path}:{lineno}: column 1: bad label {parts[0]!r}"
                ) from exc
            entries: dict[int, float] = {}
            for col, tok in enumerate(parts[1:], start=2):
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise DatasetFormatError(
                        f"{path}:{lineno}: column {col}: expected idx:val, got {tok!r}"
                    )
                try:
                    idx = int(idx_s)
                    val = float(val_s)
                except ValueError as exc:
                    raise DatasetFormatError(
                        f"{path}:{lineno}: column {col}: bad entry {tok!r}"
                    ) from exc
                if idx < 1:
                    raise DatasetFormatError(
                        f"{path}:{lineno}: column {col}: index {idx} is not 1-based"
                    )
                if idx in entries:
                    raise DatasetFormatError(
                        f"{path}:{lineno}: column {col}: duplicate index {idx}"
                    )
                entries[idx] = val
                max_idx = max(max_idx, idx)
            rows.append(entries)
            labels.append(label)
    if not rows:
        raise DatasetFormatError(f"{path}: empty dataset")
    width = d if d is not None else max_idx
    if max_idx > width:
        raise DatasetFormatError(f"{path}: index {max_idx} exceeds declared d={d}")
    A = np.zeros((len(rows), width))
    for i, entries in enumerate(rows):
        for idx, val in entries.items():
            A[i, idx - 1] = val
    return A, np.asarray(labels)


def planted_covariance_rows(
    samples: int, d: int, seed: int, eigenvalues: Array | None = None
) -> tuple[Array, Array]:
    """Gaussian rows with covariance B diag(eigs) B.T, B random orthogonal.

    Defaults to eigenvalues (10, 9, 1, ..., 1): a dominant pair close
    enough that convergence is slow enough to observe.  Returns (X, v1)
    where v1 is the planted principal eigenvector.
    """
    if eigenvalues is None:
        eigenvalues = np.ones(d)
        eigenvalues[0] = 10.0
        if d > 1:
            eigenvalues[1] = 9.0
    eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
    if eigenvalues.shape != (d,) or np.any(eigenvalues <= 0):
        raise ValueError("eigenvalues must be d positive values")
    rng = SharedRandomness(seed).stream(DATA, 1)
    basis, _ = np.linalg.qr(rng.standard_normal((d, d)))
    Z = rng.standard_normal((samples, d))
    X = (Z * np.sqrt(eigenvalues)) @ basis.T
    return X, basis[:, 0].copy()


def synthetic_regression_fallback(samples: int = 8192, d: int = 12, seed: int = 0) -> LeastSquares:
    """Stand-in regression instance with the shape of the small CPU dataset.

    Used when no dataset file is supplied; callers must flag its use in
    the output so the rows are never mistaken for the real data.
    """
    rng = SharedRandomness(seed).stream(DATA, 2)
    A = rng.standard_normal((samples, d))
    w = rng.uniform(-2.0, 2.0, d)
    noise = 0.05 * rng.standard_normal(samples)
    return LeastSquares(A, A @ w + noise, None)
