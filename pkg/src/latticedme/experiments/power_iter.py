"""Distributed power iteration with quantized matrix-vector exchange.

Each machine holds a block of rows X_i and contributes u_i = X_i.T X_i x
per iteration; the machines average the u_i through the codec and
normalize.  A full-precision warmup first lets the inter-machine
distance settle; the largest distance seen fixes the codec budget, and
the quantized run then restarts from the same initial vector.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..randomness import INIT, SharedRandomness
from ..rotation import RotationSpec, rotate
from .config import ExperimentConfig
from .data import planted_covariance_rows
from .exchange import make_exchange
from .records import POWER_ITER_COLUMNS

Array = np.ndarray

Y_WARMUP_FACTOR = 2.0

__all__ = ["run_power_iteration", "POWER_ITER_COLUMNS"]


def _max_pair_linf(us: Array) -> float:
    n = us.shape[0]
    return max(
        float(np.max(np.abs(us[i] - us[j])))
        for i in range(n)
        for j in range(i + 1, n)
    )


def _run_single_seed(cfg: ExperimentConfig, seed: int) -> list[dict]:
    X, v1 = planted_covariance_rows(cfg.samples, cfg.d, seed)
    block = cfg.samples // cfg.n
    if block < 1:
        raise ValueError(f"samples={cfg.samples} cannot fill {cfg.n} blocks")
    mats = [X[i * block:(i + 1) * block] for i in range(cfg.n)]
    grams = [Xi.T @ Xi for Xi in mats]
    shared = SharedRandomness(seed)
    x0 = shared.stream(INIT, 0).standard_normal(cfg.d)
    x0 = x0 / np.linalg.norm(x0)

    rotated = cfg.quantizer == "lattice_rotation"
    rot = RotationSpec.from_seed(seed, cfg.d) if rotated else None

    def meta(phase: str, t: int, **kw) -> dict:
        row = {
            "experiment": "power_iter",
            "seed": seed,
            "phase": phase,
            "iteration": t,
            "quantizer": cfg.quantizer,
            "n": cfg.n,
            "d": cfg.d,
            "q": cfg.q,
            "alignment": 0.0,
            "quant_error": 0.0,
            "u_diff_linf": 0.0,
            "bits": 0,
            "y_estimate": float("nan"),
            "decode_failures": 0,
        }
        row.update(kw)
        return row

    rows: list[dict] = []
    x = x0.copy()
    y_obs = 0.0
    for t in range(cfg.warmup):
        us = np.stack([G @ x for G in grams])
        if cfg.n > 1:
            if rotated:
                hs = np.stack([rotate(u, rot) for u in us])
            else:
                hs = us
            y_obs = max(y_obs, _max_pair_linf(hs))
        mean = us.mean(axis=0)
        x = mean / np.linalg.norm(mean)
        rows.append(meta(
            "warmup", t,
            alignment=float(abs(x @ v1)),
            u_diff_linf=_max_pair_linf(us) if cfg.n > 1 else 0.0,
        ))

    # the budget must stay positive even on degenerate symmetric data
    y = Y_WARMUP_FACTOR * y_obs if y_obs > 0 else 1.0
    ex = make_exchange(cfg.quantizer, cfg.n, cfg.d, cfg.q, seed, "fixed", y)

    x = x0.copy()
    for t in range(cfg.iterations):
        us = np.stack([G @ x for G in grams])
        res = ex.step(us, t)
        norm = np.linalg.norm(res.est)
        if norm == 0 or not np.isfinite(norm):
            rows.append(meta("main", t, alignment=float("nan"), bits=res.bits))
            break
        x = res.est / norm
        rows.append(meta(
            "main", t,
            alignment=float(abs(x @ v1)),
            quant_error=res.quant_error,
            u_diff_linf=_max_pair_linf(us) if cfg.n > 1 else 0.0,
            bits=res.bits,
            y_estimate=res.y_estimate,
            decode_failures=res.decode_failures,
        ))
    return rows


def run_power_iteration(cfg: ExperimentConfig) -> list[dict]:
    if cfg.n < 2:
        raise ValueError(f"need at least 2 machines, got {cfg.n}")
    with ThreadPoolExecutor(max_workers=min(len(cfg.seeds), 8)) as pool:
        per_seed = list(pool.map(lambda s: _run_single_seed(cfg, s), cfg.seeds))
    return [row for rows in per_seed for row in rows]
