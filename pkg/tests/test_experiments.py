"""Experiment harness: config, datasets, records, exchanges, runners, CLI."""

import math

import numpy as np
import pytest

from latticedme.experiments import (
    DSGD_COLUMNS,
    LOCAL_SGD_COLUMNS,
    POWER_ITER_COLUMNS,
    SUBLINEAR_SIM_COLUMNS,
    ConfigError,
    DatasetFormatError,
    ExperimentConfig,
    emit,
    gen_least_squares,
    load_config_file,
    make_exchange,
    mean_over_seeds,
    parse_config_text,
    parse_csv_text,
    parse_libsvm,
    planted_covariance_rows,
    read_rows,
    rows_to_csv_text,
    run_dsgd,
    run_local_sgd,
    run_power_iteration,
    run_sublinear_sim,
)
from latticedme.experiments.cli import main
from latticedme.sublinear import sublinear_variance_sim


def tiny_cfg(**kw):
    base = dict(
        experiment="dsgd", samples=64, d=6, n=2, q=8, learning_rate=0.1,
        iterations=4, seeds=(0,), quantizer="lattice", y_rule="scale15",
    )
    base.update(kw)
    return ExperimentConfig(**base)


# -------------------------------------------------------------------- config


def test_config_defaults_and_with():
    cfg = ExperimentConfig("dsgd")
    assert cfg.samples == 8192 and cfg.d == 100 and cfg.n == 2 and cfg.q == 8
    assert cfg.learning_rate == 0.1
    assert cfg.seeds == (0, 10, 20, 30, 40)
    cfg2 = cfg.with_(d=16)
    assert cfg2.d == 16 and cfg.d == 100


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig("unknown")
    with pytest.raises(ConfigError):
        tiny_cfg(samples=0)
    with pytest.raises(ConfigError):
        tiny_cfg(learning_rate=0.0)
    with pytest.raises(ConfigError):
        tiny_cfg(seeds=())
    with pytest.raises(ConfigError):
        tiny_cfg(quantizer="int8")
    with pytest.raises(ConfigError):
        tiny_cfg(y_rule="adaptive")
    with pytest.raises(ConfigError):
        tiny_cfg(y_rule="fixed", y_fixed=0.0)
    with pytest.raises(ConfigError):
        tiny_cfg(dataset="imagenet")
    with pytest.raises(ConfigError):
        tiny_cfg(fmt="parquet")


def test_parse_config_text():
    text = """
    # a comment
    d = 32
    learning-rate = 0.5   # dashes become underscores
    seeds = 1, 2,3
    quantizer = lattice_rotation
    """
    got = parse_config_text(text)
    assert got == {
        "d": 32,
        "learning_rate": 0.5,
        "seeds": (1, 2, 3),
        "quantizer": "lattice_rotation",
    }


def test_parse_config_errors_carry_line_numbers():
    with pytest.raises(ConfigError, match="mycfg:2"):
        parse_config_text("d = 4\nnot a pair\n", source="mycfg")
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text("dimension = 4\n")
    with pytest.raises(ConfigError, match="bad value"):
        parse_config_text("d = four\n")


def test_load_config_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("d = 12\nn = 4\n")
    assert load_config_file(str(p)) == {"d": 12, "n": 4}


# ---------------------------------------------------------------------- data


def test_gen_least_squares_planted_optimum():
    ds = gen_least_squares(200, 10, seed=3)
    assert ds.loss(ds.w_star) == pytest.approx(0.0, abs=1e-20)
    assert np.allclose(ds.gradient(ds.w_star), 0.0, atol=1e-12)
    # deterministic per seed
    again = gen_least_squares(200, 10, seed=3)
    assert np.array_equal(ds.A, again.A)


def test_batch_gradients_average_to_full():
    ds = gen_least_squares(100, 5, seed=4)
    w = np.random.default_rng(0).standard_normal(5)
    rows = np.arange(100)
    halves = [ds.batch_gradient(w, rows[:50]), ds.batch_gradient(w, rows[50:])]
    assert np.allclose(np.mean(halves, axis=0), ds.gradient(w), atol=1e-12)


def test_parse_libsvm_round_trip(tmp_path):
    p = tmp_path / "data.txt"
    p.write_text(
        "1.5 1:2.0 3:-1.0\n"
        "-0.5 2:4.0\n"
        "2.0 3:1.0 1:5.0  # out-of-order is fine\n"
    )
    A, b = parse_libsvm(str(p))
    assert A.shape == (3, 3)
    assert np.array_equal(b, [1.5, -0.5, 2.0])
    assert np.array_equal(A[0], [2.0, 0.0, -1.0])
    assert np.array_equal(A[2], [5.0, 0.0, 1.0])


def test_parse_libsvm_errors(tmp_path):
    dup = tmp_path / "dup.txt"
    dup.write_text("1.0 1:2.0 1:3.0\n")
    with pytest.raises(DatasetFormatError, match="line|:1:"):
        parse_libsvm(str(dup))

    empty = tmp_path / "empty.txt"
    empty.write_text("# nothing\n\n")
    with pytest.raises(DatasetFormatError, match="empty"):
        parse_libsvm(str(empty))

    bad = tmp_path / "bad.txt"
    bad.write_text("1.0 5\n")
    with pytest.raises(DatasetFormatError, match="idx:val"):
        parse_libsvm(str(bad))

    over = tmp_path / "over.txt"
    over.write_text("1.0 7:1.0\n")
    with pytest.raises(DatasetFormatError, match="exceeds"):
        parse_libsvm(str(over), d=4)


def test_planted_covariance_rows():
    X, v1 = planted_covariance_rows(20000, 6, seed=5)
    assert np.linalg.norm(v1) == pytest.approx(1.0)
    cov = X.T @ X / X.shape[0]
    # the planted direction carries the top eigenvalue, 10
    assert v1 @ cov @ v1 == pytest.approx(10.0, rel=0.1)


# ------------------------------------------------------------------- records


def test_csv_round_trip_typed():
    rows = [
        {"experiment": "dsgd", "dataset": "synthetic", "seed": 0, "iteration": 1,
         "quantizer": "lattice", "y_rule": "scale15", "n": 2, "d": 4, "q": 8,
         "loss": 1.25, "output_variance": 1e-17, "input_variance": 0.5,
         "bits": 600, "y_estimate": 0.125, "norm_diff_l2": 2.0,
         "norm_diff_linf": 1.0, "norm_g0_l2": 3.0, "coord_range_g0": 0.7,
         "decode_failures": 0, "diverged": 0},
    ]
    text = rows_to_csv_text(DSGD_COLUMNS, rows)
    names, back = parse_csv_text(text)
    assert names == DSGD_COLUMNS
    assert back == rows
    assert isinstance(back[0]["seed"], int)
    assert isinstance(back[0]["loss"], float)


def test_emit_byte_identical(tmp_path):
    rows = [{"experiment": "x", "seed": 0, "d": 2, "q": 1, "y": 0.1,
             "bits_per_coordinate": 0.5, "side": 1 / 3, "variance": 2 / 81,
             "trials": 0, "successes": 0, "mean_sq_error": float("nan")}]
    p1 = tmp_path / "a.csv"
    p2 = tmp_path / "b.csv"
    emit(rows, str(p1), SUBLINEAR_SIM_COLUMNS)
    emit(rows, str(p2), SUBLINEAR_SIM_COLUMNS)
    assert p1.read_bytes() == p2.read_bytes()


def test_emit_json_and_read_back(tmp_path):
    rows = [{"experiment": "x", "seed": 3, "d": 2, "q": 1, "y": 0.5,
             "bits_per_coordinate": 1.0, "side": 0.25, "variance": 0.01,
             "trials": 10, "successes": 9, "mean_sq_error": 0.001}]
    p = tmp_path / "out.json"
    emit(rows, str(p), SUBLINEAR_SIM_COLUMNS, fmt="json")
    names, back = read_rows(str(p))
    assert back[0]["seed"] == 3 and back[0]["successes"] == 9


def test_emit_creates_directories(tmp_path):
    p = tmp_path / "nested" / "deep" / "out.csv"
    emit([], str(p), ("a", "b"))
    assert p.exists()


def test_emit_bad_format():
    with pytest.raises(ValueError):
        emit([], "x.csv", ("a",), fmt="xml")


def test_mean_over_seeds():
    rows = [
        {"quantizer": "a", "seed": 0, "loss": 1.0},
        {"quantizer": "a", "seed": 1, "loss": 3.0},
        {"quantizer": "b", "seed": 0, "loss": 5.0},
    ]
    agg = mean_over_seeds(rows, ("quantizer",), ("loss",))
    assert agg == [
        {"quantizer": "a", "seed_count": 2, "loss": 2.0},
        {"quantizer": "b", "seed_count": 1, "loss": 5.0},
    ]


# ----------------------------------------------------------------- exchanges


def test_exact_exchange_costs_and_mean():
    ex = make_exchange("none", 3, 5, 8, seed=0, y_rule="scale15", y_fixed=1.0)
    v = np.random.default_rng(1).standard_normal((3, 5))
    res = ex.step(v, 1)
    assert np.allclose(res.est, v.mean(axis=0))
    assert res.bits == 2 * 2 * 5 * 64
    assert res.decode_failures == 0


def test_lattice_exchange_needs_calibration():
    ex = make_exchange("lattice", 2, 4, 8, seed=0, y_rule="scale15", y_fixed=1.0)
    with pytest.raises(RuntimeError, match="initial"):
        ex.step(np.zeros((2, 4)), 1)


def test_lattice_pair_exchange_tracks_mean():
    rng = np.random.default_rng(2)
    ex = make_exchange("lattice", 2, 16, 8, seed=3, y_rule="scale15", y_fixed=1.0)
    base = rng.standard_normal(16)
    v0 = ex.initial(np.stack([base, base + rng.uniform(-0.1, 0.1, 16)]))
    assert np.isfinite(v0.y_estimate) or True  # calibration always returns
    for t in range(1, 8):
        pair = np.stack([base, base + rng.uniform(-0.05, 0.05, 16)])
        res = ex.step(pair, t)
        assert res.decode_failures == 0
        # own input at full precision, peer through the codec: error is
        # bounded by half the peer-side cell
        s = 2.0 * res.y_estimate / (8 - 1)
        assert np.max(np.abs(res.est - pair.mean(axis=0))) <= s / 2 + 1e-12
        assert res.bits >= 2 * 48  # two color words at 3 bits/coordinate


def test_lattice_star_outputs_close():
    rng = np.random.default_rng(3)
    n, d = 4, 8
    ex = make_exchange("lattice", n, d, 16, seed=5, y_rule="scale3", y_fixed=1.0)
    base = rng.standard_normal(d)
    vs = np.stack([base + rng.uniform(-0.05, 0.05, d) for _ in range(n)])
    ex.initial(vs)
    res = ex.step(vs, 1)
    assert res.decode_failures == 0
    assert np.max(np.abs(res.est - vs.mean(axis=0))) < 0.1


def test_rotated_exchange_round_trips():
    rng = np.random.default_rng(4)
    ex = make_exchange("lattice_rotation", 2, 20, 16, seed=7, y_rule="scale15", y_fixed=1.0)
    base = rng.standard_normal(20)
    ex.initial(np.stack([base, base + 0.01 * rng.standard_normal(20)]))
    res = ex.step(np.stack([base, base + 0.01 * rng.standard_normal(20)]), 1)
    assert res.per_machine.shape == (2, 20)  # back in the original domain
    assert res.decode_failures == 0


def test_baseline_exchange_bit_parity():
    # all quantized methods pay ~log2(q) bits per coordinate plus scales
    d, q = 32, 8
    lattice = make_exchange("lattice", 2, d, q, seed=0, y_rule="fixed", y_fixed=1.0)
    v = np.random.default_rng(5).standard_normal((2, d)) * 0.01
    lattice.initial(v)
    lat_bits = lattice.step(v, 1).bits
    for kind in ("qsgd_l2", "qsgd_range"):
        ex = make_exchange(kind, 2, d, q, seed=0, y_rule="fixed", y_fixed=1.0)
        ex.initial(v)
        got = ex.step(v, 1).bits
        # same per-coordinate rate; baselines add their scale floats
        assert got == lat_bits + 2 * 64 * (1 if kind == "qsgd_l2" else 2)


def test_periodic_rule_updates_only_on_schedule():
    ex = make_exchange("lattice", 2, 8, 8, seed=9, y_rule="periodic16", y_fixed=1.0)
    rng = np.random.default_rng(6)
    base = rng.standard_normal(8)
    ex.initial(np.stack([base, base + 0.01]))
    y_before = ex.y
    ex.step(np.stack([base, base + 0.01]), 1)  # no probe, not on schedule
    assert ex.y == y_before
    probe = (base, base + 0.5)
    ex.step(np.stack([base, base + 0.01]), 5, probe)
    assert ex.y == pytest.approx(1.6 * 0.5)


# ------------------------------------------------------------------- runners


def test_dsgd_deterministic_and_column_complete():
    cfg = tiny_cfg()
    rows1 = run_dsgd(cfg)
    rows2 = run_dsgd(cfg)
    assert rows1 == rows2
    assert len(rows1) == cfg.iterations
    for row in rows1:
        assert tuple(row.keys()) == tuple(DSGD_COLUMNS)


def test_dsgd_exact_matches_plain_gd_on_full_batches():
    # quantizer none with n=2 averages the two half-batch gradients, which
    # is exactly the full gradient, so the trajectory is plain GD
    cfg = tiny_cfg(quantizer="none", samples=64, iterations=5)
    rows = run_dsgd(cfg)
    ds = gen_least_squares(64, 6, seed=0)
    w = np.zeros(6)
    for t in range(5):
        assert rows[t]["loss"] == pytest.approx(ds.loss(w), rel=1e-9)
        from latticedme.randomness import DATA, SharedRandomness

        perm = SharedRandomness(0).stream(DATA, 3, t).permutation(64)
        g = np.mean(
            [ds.batch_gradient(w, perm[:32]), ds.batch_gradient(w, perm[32:64])],
            axis=0,
        )
        w = w - 0.1 * g
    assert all(r["decode_failures"] == 0 for r in rows)


def test_dsgd_loss_decreases_without_quantization():
    rows = run_dsgd(tiny_cfg(quantizer="none", iterations=8))
    losses = [r["loss"] for r in rows]
    assert losses[-1] < losses[0]


def test_dsgd_lattice_beats_input_variance_on_tiny_run():
    rows = run_dsgd(tiny_cfg(d=20, samples=400, iterations=8))
    late = [r for r in rows if r["iteration"] >= 3]
    assert late
    better = sum(r["output_variance"] < r["input_variance"] for r in late)
    assert better >= len(late) - 1


def test_local_sgd_matches_inline_reimplementation():
    cfg = tiny_cfg(iterations=3, local_steps=2, quantizer="none")
    rows = run_local_sgd(cfg)

    from latticedme.randomness import DATA, SharedRandomness

    ds = gen_least_squares(cfg.samples, cfg.d, seed=0)
    w_bar = np.zeros(cfg.d)
    expect = []
    for r in range(3):
        locals_ = np.tile(w_bar, (2, 1))
        for step in range(2):
            perm = SharedRandomness(0).stream(DATA, 3, r * 2 + step).permutation(cfg.samples)
            size = cfg.samples // 2
            for i in range(2):
                rows_i = perm[i * size:(i + 1) * size]
                locals_[i] -= cfg.learning_rate * ds.batch_gradient(locals_[i], rows_i)
        w_bar = w_bar + (locals_ - w_bar).mean(axis=0)
        expect.append(ds.loss(w_bar))
    got = [row["loss"] for row in rows]
    assert got == pytest.approx(expect, rel=1e-12)
    for row in rows:
        assert tuple(row.keys()) == tuple(LOCAL_SGD_COLUMNS)


def test_power_iter_smoke_converges_exact():
    cfg = ExperimentConfig(
        "power_iter", samples=4000, d=8, n=2, q=64, iterations=60,
        seeds=(1,), quantizer="none", warmup=5,
    )
    rows = run_power_iteration(cfg)
    for row in rows:
        assert tuple(row.keys()) == tuple(POWER_ITER_COLUMNS)
    warm = [r for r in rows if r["phase"] == "warmup"]
    mains = [r for r in rows if r["phase"] == "main"]
    assert len(warm) == 5
    assert mains[-1]["alignment"] > 0.98


def test_power_iter_lattice_tracks_exact():
    base = dict(samples=4000, d=8, n=2, q=64, iterations=60, seeds=(1,), warmup=5)
    exact = run_power_iteration(ExperimentConfig("power_iter", quantizer="none", **base))
    latt = run_power_iteration(ExperimentConfig("power_iter", quantizer="lattice", **base))
    fin_exact = [r for r in exact if r["phase"] == "main"][-1]["alignment"]
    fin_latt = [r for r in latt if r["phase"] == "main"][-1]["alignment"]
    assert abs(fin_exact - fin_latt) < 0.02


def test_sublinear_sim_rows():
    cfg = ExperimentConfig("sublinear_sim", d=8, q=1, seeds=(0,), y_fixed=1.0)
    rows = run_sublinear_sim(cfg, bits_grid=(0.5,), exact_trials=20)
    assert len(rows) == 2
    closed = rows[0]
    sim = sublinear_variance_sim(1.0, 8, 0.5)
    assert closed["side"] == pytest.approx(sim.s)
    assert closed["variance"] == pytest.approx(sim.variance)
    exact = rows[1]
    assert exact["trials"] == 20
    assert exact["successes"] > 0
    for row in rows:
        assert tuple(row.keys()) == tuple(SUBLINEAR_SIM_COLUMNS)


# ----------------------------------------------------------------------- CLI


def test_cli_dsgd_end_to_end(tmp_path, capsys):
    out = tmp_path / "run.csv"
    rc = main([
        "dsgd", "--samples", "64", "--d", "6", "--iterations", "3",
        "--seed", "0", "--out", str(out),
    ])
    assert rc == 0
    names, rows = read_rows(str(out))
    assert names == DSGD_COLUMNS
    assert len(rows) == 3
    assert "rows ->" in capsys.readouterr().out


def test_cli_honors_config_file_and_flag_precedence(tmp_path):
    cfg_file = tmp_path / "exp.cfg"
    cfg_file.write_text("samples = 64\nd = 6\niterations = 2\nseeds = 0\n")
    out = tmp_path / "o.csv"
    rc = main([
        "dsgd", "--config", str(cfg_file), "--iterations", "4", "--out", str(out),
    ])
    assert rc == 0
    _, rows = read_rows(str(out))
    assert len(rows) == 4  # explicit flag beats the config file


def test_cli_out_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv("LATTICEDME_OUT", str(tmp_path))
    rc = main([
        "sublinear-sim", "--d", "4", "--bits", "1.0",
    ])
    assert rc == 0
    assert (tmp_path / "sublinear_sim.csv").exists()


def test_cli_json_format(tmp_path):
    out = tmp_path / "r.json"
    rc = main([
        "sublinear-sim", "--d", "4", "--bits", "0.5,1.0",
        "--out", str(out), "--format", "json",
    ])
    assert rc == 0
    _, rows = read_rows(str(out))
    assert len(rows) == 2


def test_cli_rejects_bad_values(tmp_path, capsys):
    rc = main(["dsgd", "--quantizer", "int8", "--out", str(tmp_path / "x.csv")])
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_cli_codec_bench(tmp_path, capsys):
    out = tmp_path / "bench.csv"
    rc = main(["codec-bench", "--trials", "100", "--d", "32", "--out", str(out)])
    assert rc == 0
    _, rows = read_rows(str(out))
    assert all(r["agrees"] == 1 for r in rows)


def test_cli_protocol_bench_star(tmp_path, capsys):
    out = tmp_path / "proto.csv"
    rc = main([
        "protocol-bench", "--protocol", "star", "--n", "4", "--d", "8",
        "--q", "16", "--trials", "5", "--out", str(out),
    ])
    assert rc == 0
    _, rows = read_rows(str(out))
    assert len(rows) == 5
    assert all(r["success"] == 1 for r in rows)
