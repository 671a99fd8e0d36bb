"""Backend benchmark: compiled kernels against the numpy fallback.

Times the hot kernels through the public codec path on both available
backends and cross-checks that they produce identical results.  Used by
the ``codec-bench`` command.
"""

from __future__ import annotations

import time

import numpy as np

from .backend import available_backends
from .randomness import SharedRandomness, STOCH

KERNEL_OPS = ("fwht", "round_nearest", "round_to_residue", "voronoi_candidates")


def _bench_one(impl, op: str, trials: int, d: int, q: int, rng: np.random.Generator):
    if op == "fwht":
        data = rng.standard_normal((trials, d))
        buf = np.ascontiguousarray(data.copy())
        t0 = time.perf_counter()
        impl.fwht_inplace(buf)
        elapsed = time.perf_counter() - t0
        return elapsed, float(np.abs(buf).sum())
    if op == "round_nearest":
        t = rng.standard_normal((trials, d)) * q
        t0 = time.perf_counter()
        out = impl.round_nearest(t)
        elapsed = time.perf_counter() - t0
        return elapsed, float(out.sum())
    if op == "round_to_residue":
        t = rng.standard_normal((trials, d)) * q
        residues = rng.integers(0, q, (trials, d))
        t0 = time.perf_counter()
        out = impl.round_to_residue(t, residues, q)
        elapsed = time.perf_counter() - t0
        return elapsed, float(out.sum())
    if op == "voronoi_candidates":
        centers = rng.uniform(-0.5, 0.5, (max(1, trials // 50), min(d, 8)))
        total = 0
        t0 = time.perf_counter()
        for c in centers:
            total += impl.voronoi_candidates(c, 1.0).shape[0]
        elapsed = time.perf_counter() - t0
        return elapsed, float(total)
    raise ValueError(f"unknown op {op!r}")


def run_codec_bench(trials: int = 2000, d: int = 256, q: int = 16, seed: int = 0) -> list[dict]:
    """One row per (backend, op): wall time plus a checksum for agreement.

    Checksums must agree across backends; the mismatch flag in each row
    compares against the first backend listed.
    """
    rows = []
    backends = available_backends()
    reference: dict = {}
    for name, impl in backends.items():
        for op in KERNEL_OPS:
            rng = SharedRandomness(seed).stream(STOCH, hash(op) & 0xFFFF)
            elapsed, checksum = _bench_one(impl, op, trials, d, q, rng)
            if op not in reference:
                reference[op] = checksum
            rows.append(
                {
                    "backend": name,
                    "op": op,
                    "trials": trials,
                    "d": d,
                    "q": q,
                    "seconds": elapsed,
                    "checksum": checksum,
                    "agrees": checksum == reference[op],
                }
            )
    return rows
