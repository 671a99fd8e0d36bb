"""Command-line entry point for experiments and benchmarks.

Subcommands: dsgd, local-sgd, power-iter, sublinear-sim, codec-bench,
protocol-bench.  Flags mirror the config object; a key=value file via
--config supplies defaults that explicit flags override.  Results land
in --out, or <LATTICEDME_OUT or .>/<name>.<format>.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from ..benchmark import run_codec_bench
from ..protocols import (
    ProtocolError,
    SimNetwork,
    robust_variance_reduction,
    star_mean_estimation,
    tree_mean_estimation,
    variance_reduction,
)
from ..quantizer import QuantParams
from ..randomness import DATA, SharedRandomness
from .config import ConfigError, ExperimentConfig, load_config_file
from .dsgd import run_dsgd
from .local_sgd import run_local_sgd
from .power_iter import run_power_iteration
from .records import (
    CODEC_BENCH_COLUMNS,
    DSGD_COLUMNS,
    LOCAL_SGD_COLUMNS,
    POWER_ITER_COLUMNS,
    PROTOCOL_BENCH_COLUMNS,
    SUBLINEAR_SIM_COLUMNS,
    emit,
)
from .sublinear_sim import run_sublinear_sim

OUT_DIR_ENV = "LATTICEDME_OUT"

# per-subcommand defaults layered under config file and flags
SUBCOMMAND_DEFAULTS = {
    "dsgd": {"experiment": "dsgd"},
    "local_sgd": {
        "experiment": "local_sgd", "learning_rate": 0.1,
        "quantizer": "lattice_rotation",
    },
    "power_iter": {
        "experiment": "power_iter", "d": 128, "q": 64, "iterations": 200,
    },
    "sublinear_sim": {
        "experiment": "sublinear_sim", "d": 8, "q": 1, "seeds": (0,),
    },
}


def _experiment_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="key=value config file")
    sub.add_argument("--samples", type=int, default=None)
    sub.add_argument("--d", type=int, default=None)
    sub.add_argument("--n", type=int, default=None)
    sub.add_argument("--q", type=int, default=None)
    sub.add_argument("--learning-rate", type=float, default=None)
    sub.add_argument("--iterations", type=int, default=None)
    sub.add_argument("--seed", default=None, help="comma-separated seed list")
    sub.add_argument("--quantizer", default=None)
    sub.add_argument("--y-rule", default=None)
    sub.add_argument("--y-fixed", type=float, default=None)
    sub.add_argument("--dataset", default=None)
    sub.add_argument("--data-path", default=None)
    sub.add_argument("--local-steps", type=int, default=None)
    sub.add_argument("--warmup", type=int, default=None)
    sub.add_argument("--out", default=None, help="output file path")
    sub.add_argument("--format", dest="fmt", default=None, choices=("csv", "json"))


def _build_config(args, name: str) -> ExperimentConfig:
    merged = dict(SUBCOMMAND_DEFAULTS[name])
    if args.config:
        merged.update(load_config_file(args.config))
    flag_map = {
        "samples": args.samples, "d": args.d, "n": args.n, "q": args.q,
        "learning_rate": args.learning_rate, "iterations": args.iterations,
        "quantizer": args.quantizer, "y_rule": args.y_rule,
        "y_fixed": args.y_fixed, "dataset": args.dataset,
        "data_path": args.data_path, "local_steps": args.local_steps,
        "warmup": args.warmup, "out": args.out, "fmt": args.fmt,
    }
    merged.update({k: v for k, v in flag_map.items() if v is not None})
    if args.seed is not None:
        merged["seeds"] = tuple(int(s) for s in str(args.seed).split(",") if s.strip())
    merged["experiment"] = SUBCOMMAND_DEFAULTS[name]["experiment"]
    return ExperimentConfig(**merged)


def _out_path(cfg_out: str | None, name: str, fmt: str) -> str:
    if cfg_out:
        return cfg_out
    base = os.environ.get(OUT_DIR_ENV, ".")
    return os.path.join(base, f"{name}.{fmt}")


def _emit_and_report(rows, columns, cfg_out, name, fmt) -> int:
    path = emit(rows, _out_path(cfg_out, name, fmt), columns, fmt)
    print(f"{name}: {len(rows)} rows -> {path}")
    return 0


def _cmd_dsgd(args) -> int:
    cfg = _build_config(args, "dsgd")
    rows = run_dsgd(cfg)
    diverged = sum(r["diverged"] for r in rows)
    if diverged:
        print(f"warning: {diverged} run(s) diverged", file=sys.stderr)
    return _emit_and_report(rows, DSGD_COLUMNS, cfg.out, "dsgd", cfg.fmt)


def _cmd_local_sgd(args) -> int:
    cfg = _build_config(args, "local_sgd")
    rows = run_local_sgd(cfg)
    return _emit_and_report(rows, LOCAL_SGD_COLUMNS, cfg.out, "local_sgd", cfg.fmt)


def _cmd_power_iter(args) -> int:
    cfg = _build_config(args, "power_iter")
    rows = run_power_iteration(cfg)
    for seed in cfg.seeds:
        final = [r for r in rows if r["seed"] == seed and r["phase"] == "main"]
        if final and not (final[-1]["alignment"] >= 0.99):
            print(
                f"warning: seed {seed} did not converge within "
                f"{cfg.iterations} iterations (alignment {final[-1]['alignment']:.4f})",
                file=sys.stderr,
            )
    return _emit_and_report(rows, POWER_ITER_COLUMNS, cfg.out, "power_iter", cfg.fmt)


def _cmd_sublinear_sim(args) -> int:
    cfg = _build_config(args, "sublinear_sim")
    bits_grid = tuple(float(b) for b in str(args.bits).split(",") if b.strip())
    rows = run_sublinear_sim(cfg, bits_grid, exact_trials=args.exact_trials)
    return _emit_and_report(rows, SUBLINEAR_SIM_COLUMNS, cfg.out, "sublinear_sim", cfg.fmt)


def _cmd_codec_bench(args) -> int:
    rows = run_codec_bench(trials=args.trials, d=args.d, q=args.q, seed=args.seed)
    by_op: dict = {}
    for r in rows:
        by_op.setdefault(r["op"], {})[r["backend"]] = r
    for op, impls in sorted(by_op.items()):
        line = f"  {op:20s}"
        for backend_name in sorted(impls):
            line += f" {backend_name}={impls[backend_name]['seconds']:.4f}s"
        if "pure" in impls and "compiled" in impls and impls["compiled"]["seconds"] > 0:
            line += f" speedup={impls['pure']['seconds'] / impls['compiled']['seconds']:.1f}x"
        print(line)
    fmt = args.fmt or "csv"
    return _emit_and_report(rows, CODEC_BENCH_COLUMNS, args.out, "codec_bench", fmt)


def _protocol_trial(args, protocol: str, seed: int, trial: int) -> dict:
    run_seed = seed * 1_000_003 + trial
    shared = SharedRandomness(run_seed)
    rng = shared.stream(DATA, 5)
    row = {
        "protocol": protocol, "n": args.n, "d": args.d, "trial": trial,
        "seed": seed, "q": args.q, "m": args.m, "success": 0, "mse": 0.0,
        "bits_total": 0, "bits_max_machine": 0, "far_events": 0,
    }
    if protocol in ("star", "tree"):
        center = rng.uniform(-100.0, 100.0, args.d)
        inputs = center + rng.uniform(-args.y / 4, args.y / 4, (args.n, args.d))
        net = SimNetwork(inputs, run_seed)
        if protocol == "star":
            params = QuantParams(args.q, args.y, args.d, round_seed=run_seed)
            res = star_mean_estimation(net, params, round_base=0)
        else:
            res = tree_mean_estimation(net, args.m, args.y, round_base=0)
        target = inputs.mean(axis=0)
    else:
        nabla = rng.uniform(-100.0, 100.0, args.d)
        # sigma is the noise scale of the whole vector: E|x_i - nabla|^2 = sigma^2
        coord_std = args.sigma / np.sqrt(args.d)
        inputs = nabla + coord_std * rng.standard_normal((args.n, args.d))
        net = SimNetwork(inputs, run_seed)
        if protocol == "vr":
            res = variance_reduction(net, sigma=args.sigma, preset="optimal", round_base=0)
        else:
            res = robust_variance_reduction(net, sigma=args.sigma, q=args.q, round_base=0)
        target = nabla
    est = res.est
    row["success"] = int(res.success)
    row["mse"] = float(np.sum((est - target) ** 2)) if est is not None else float("nan")
    totals = [net.meter.sent(i) + net.meter.received(i) for i in range(args.n)]
    row["bits_total"] = int(sum(net.meter.sent(i, include_setup=True) for i in range(args.n)))
    row["bits_max_machine"] = int(max(totals))
    row["far_events"] = sum(1 for e in net.meter.entries if e.get("kind") == "far")
    return row


def _cmd_protocol_bench(args) -> int:
    rows = []
    for trial in range(args.trials):
        try:
            rows.append(_protocol_trial(args, args.protocol, args.seed, trial))
        except ProtocolError as exc:
            print(f"trial {trial}: protocol error: {exc}", file=sys.stderr)
            return 1
    ok = sum(r["success"] for r in rows)
    mses = [r["mse"] for r in rows if np.isfinite(r["mse"])]
    print(
        f"{args.protocol}: {ok}/{args.trials} successful, "
        f"mean MSE {float(np.mean(mses)) if mses else float('nan'):.6g}, "
        f"max per-machine bits {max(r['bits_max_machine'] for r in rows)}"
    )
    fmt = args.fmt or "csv"
    return _emit_and_report(rows, PROTOCOL_BENCH_COLUMNS, args.out, "protocol_bench", fmt)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="latticedme",
        description="distance-budget quantization experiments and benchmarks",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    for name, func in (
        ("dsgd", _cmd_dsgd),
        ("local-sgd", _cmd_local_sgd),
        ("power-iter", _cmd_power_iter),
    ):
        sub = subs.add_parser(name)
        _experiment_flags(sub)
        sub.set_defaults(func=func)

    sub = subs.add_parser("sublinear-sim")
    _experiment_flags(sub)
    sub.add_argument("--bits", default="0.5,1.0,2.0", help="comma-separated bit budgets")
    sub.add_argument("--exact-trials", type=int, default=0)
    sub.set_defaults(func=_cmd_sublinear_sim)

    sub = subs.add_parser("codec-bench")
    sub.add_argument("--trials", type=int, default=2000)
    sub.add_argument("--d", type=int, default=256)
    sub.add_argument("--q", type=int, default=16)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out", default=None)
    sub.add_argument("--format", dest="fmt", default=None, choices=("csv", "json"))
    sub.set_defaults(func=_cmd_codec_bench)

    sub = subs.add_parser("protocol-bench")
    sub.add_argument("--protocol", required=True, choices=("star", "tree", "vr", "robust-vr"))
    sub.add_argument("--n", type=int, default=8)
    sub.add_argument("--d", type=int, default=32)
    sub.add_argument("--q", type=int, default=8)
    sub.add_argument("--m", type=int, default=4)
    sub.add_argument("--y", type=float, default=1.0)
    sub.add_argument("--sigma", type=float, default=1.0)
    sub.add_argument("--trials", type=int, default=100)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out", default=None)
    sub.add_argument("--format", dest="fmt", default=None, choices=("csv", "json"))
    sub.set_defaults(func=_cmd_protocol_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
