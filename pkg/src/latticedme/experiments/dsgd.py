"""Distributed SGD on least squares with quantized gradient exchange.

Per iteration: shuffle rows into n equal batches, compute batch
gradients, exchange them through the configured codec, apply the
averaged estimate.  Tracks the norm quantities that motivate
distance-budget quantization, the per-iteration output variance against
the full-data gradient, and exact bit costs.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..randomness import DATA, SharedRandomness
from .config import ExperimentConfig
from .data import (
    LeastSquares,
    gen_least_squares,
    parse_libsvm,
    synthetic_regression_fallback,
)
from .exchange import PERIODIC_INTERVAL, make_exchange
from .records import DSGD_COLUMNS

Array = np.ndarray

CPUSMALL_INIT = -1000.0   # start far from the optimum on the CPU dataset

__all__ = ["run_dsgd", "DSGD_COLUMNS", "load_dataset"]


def load_dataset(cfg: ExperimentConfig, seed: int) -> tuple[LeastSquares, Array, str]:
    """Resolve (dataset, initial weights, dataset tag) for one run."""
    if cfg.dataset == "synthetic":
        ds = gen_least_squares(cfg.samples, cfg.d, seed)
        return ds, np.zeros(ds.d), "synthetic"
    if cfg.dataset == "libsvm":
        if cfg.data_path is None:
            raise ValueError("dataset=libsvm requires data_path")
        A, b = parse_libsvm(cfg.data_path)
        ds = LeastSquares(A, b)
        return ds, np.zeros(ds.d), "libsvm"
    # cpusmall: real file if supplied, else a flagged synthetic stand-in
    if cfg.data_path is not None:
        A, b = parse_libsvm(cfg.data_path)
        ds = LeastSquares(A, b)
        tag = "cpusmall"
    else:
        ds = synthetic_regression_fallback(cfg.samples, 12, seed=0)
        tag = "cpusmall_fallback"
    return ds, np.full(ds.d, CPUSMALL_INIT), tag


def _batches(shared: SharedRandomness, t: int, samples: int, n: int) -> list[Array]:
    """n equal disjoint batches plus one spare batch for distance probing."""
    size = samples // n
    if size < 1:
        raise ValueError(f"samples={samples} cannot fill {n} batches")
    perm = shared.stream(DATA, 3, t).permutation(samples)
    count = n + 1 if (n + 1) * size <= samples else n
    return [perm[i * size:(i + 1) * size] for i in range(count)]


def _run_single_seed(cfg: ExperimentConfig, seed: int) -> list[dict]:
    ds, w, tag = load_dataset(cfg, seed)
    shared = SharedRandomness(seed)
    ex = make_exchange(cfg.quantizer, cfg.n, ds.d, cfg.q, seed, cfg.y_rule, cfg.y_fixed)
    rows: list[dict] = []
    want_probe = cfg.quantizer in ("lattice", "lattice_rotation") and cfg.y_rule == "periodic16"
    for t in range(cfg.iterations):
        loss = ds.loss(w)
        batches = _batches(shared, t, ds.samples, cfg.n)
        grads = np.stack([ds.batch_gradient(w, batches[i]) for i in range(cfg.n)])
        full_grad = ds.gradient(w)
        g0, g1 = grads[0], grads[1 % cfg.n]
        probe = None
        if want_probe and t > 0 and t % PERIODIC_INTERVAL == 0:
            # an independent same-size batch stands in for a second draw
            spare = batches[cfg.n] if len(batches) > cfg.n else batches[1 % cfg.n]
            probe = (g0, ds.batch_gradient(w, spare))
        res = ex.initial(grads) if t == 0 else ex.step(grads, t, probe)
        diffs = res.per_machine - full_grad
        out_var = float(np.mean(np.sum(diffs * diffs, axis=1)))
        in_var = float(np.mean(np.sum((grads - full_grad) ** 2, axis=1)))
        diverged = int(not np.isfinite(loss))
        rows.append({
            "experiment": "dsgd",
            "dataset": tag,
            "seed": seed,
            "iteration": t,
            "quantizer": cfg.quantizer,
            "y_rule": cfg.y_rule,
            "n": cfg.n,
            "d": ds.d,
            "q": cfg.q,
            "loss": loss,
            "output_variance": out_var,
            "input_variance": in_var,
            "bits": res.bits,
            "y_estimate": res.y_estimate,
            "norm_diff_l2": float(np.linalg.norm(g0 - g1)),
            "norm_diff_linf": float(np.max(np.abs(g0 - g1))),
            "norm_g0_l2": float(np.linalg.norm(g0)),
            "coord_range_g0": float(np.max(g0) - np.min(g0)),
            "decode_failures": res.decode_failures,
            "diverged": diverged,
        })
        if diverged:
            break
        w = w - cfg.learning_rate * res.est
    return rows


def run_dsgd(cfg: ExperimentConfig) -> list[dict]:
    """All seeds, concurrently; rows come back grouped in seed order."""
    if cfg.n < 2:
        raise ValueError(f"need at least 2 machines, got {cfg.n}")
    with ThreadPoolExecutor(max_workers=min(len(cfg.seeds), 8)) as pool:
        per_seed = list(pool.map(lambda s: _run_single_seed(cfg, s), cfg.seeds))
    return [row for rows in per_seed for row in rows]
