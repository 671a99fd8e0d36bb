"""Local SGD with quantized model-difference averaging.

Each node takes a fixed number of local gradient steps from the shared
model, then the nodes average their model differences through the
configured codec and everyone adopts the averaged model.  Differences
rather than models go through the codec so the method is not credited
for compressing a vector it already knows.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..randomness import SharedRandomness
from .config import ExperimentConfig
from .dsgd import _batches, load_dataset
from .exchange import make_exchange
from .records import LOCAL_SGD_COLUMNS

__all__ = ["run_local_sgd", "LOCAL_SGD_COLUMNS"]


def _run_single_seed(cfg: ExperimentConfig, seed: int) -> list[dict]:
    ds, w_bar, tag = load_dataset(cfg, seed)
    shared = SharedRandomness(seed)
    ex = make_exchange(cfg.quantizer, cfg.n, ds.d, cfg.q, seed, cfg.y_rule, cfg.y_fixed)
    rows: list[dict] = []
    for r in range(cfg.iterations):
        locals_ = np.tile(w_bar, (cfg.n, 1))
        for step in range(cfg.local_steps):
            batches = _batches(shared, r * cfg.local_steps + step, ds.samples, cfg.n)
            for i in range(cfg.n):
                g = ds.batch_gradient(locals_[i], batches[i])
                locals_[i] = locals_[i] - cfg.learning_rate * g
        deltas = locals_ - w_bar
        res = ex.initial(deltas) if r == 0 else ex.step(deltas, r)
        w_bar = w_bar + res.est
        loss = ds.loss(w_bar)
        diverged = int(not np.isfinite(loss))
        rows.append({
            "experiment": "local_sgd",
            "dataset": tag,
            "seed": seed,
            "round": r,
            "quantizer": cfg.quantizer,
            "n": cfg.n,
            "d": ds.d,
            "q": cfg.q,
            "loss": loss,
            "quant_error": res.quant_error,
            "bits": res.bits,
            "y_estimate": res.y_estimate,
            "decode_failures": res.decode_failures,
            "diverged": diverged,
        })
        if diverged:
            break
    return rows


def run_local_sgd(cfg: ExperimentConfig) -> list[dict]:
    if cfg.n < 2:
        raise ValueError(f"need at least 2 machines, got {cfg.n}")
    with ThreadPoolExecutor(max_workers=min(len(cfg.seeds), 8)) as pool:
        per_seed = list(pool.map(lambda s: _run_single_seed(cfg, s), cfg.seeds))
    return [row for rows in per_seed for row in rows]
