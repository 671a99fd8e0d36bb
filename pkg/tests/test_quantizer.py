"""Codec behavior: round trips, thresholds, wire format, bias."""

import numpy as np
import pytest

from latticedme.quantizer import (
    EncodedVector,
    QuantParams,
    decode,
    decode_alpha,
    encode,
    encode_alpha,
    quantize,
    roundtrip_error,
)
from latticedme.lattice import ParameterError


def test_params_validation():
    with pytest.raises(ParameterError):
        QuantParams(q=1, y=1.0, d=4, round_seed=0)
    with pytest.raises(ParameterError):
        QuantParams(q=4, y=0.0, d=4, round_seed=0)
    with pytest.raises(ParameterError):
        QuantParams(q=4, y=np.inf, d=4, round_seed=0)
    with pytest.raises(ParameterError):
        QuantParams(q=4, y=1.0, d=0, round_seed=0)
    with pytest.raises(ParameterError):
        QuantParams(q=4, y=1.0, d=4, round_seed=0, mode="other")


def test_side_length_ties_budget_to_modulus():
    p = QuantParams(q=8, y=2.0, d=4, round_seed=0)
    assert p.s == pytest.approx(4.0 / 7.0)
    assert p.decode_threshold() == pytest.approx(2.0)


def test_bit_length_matches_color_word_width():
    p = QuantParams(q=8, y=1.0, d=100, round_seed=0)
    assert p.bit_length == 300


def test_roundtrip_within_threshold_is_exact():
    rng = np.random.default_rng(0)
    for q in (2, 4, 8, 64):
        p = QuantParams(q=q, y=1.5, d=24, round_seed=7)
        for t in range(30):
            x = rng.uniform(-10, 10, p.d)
            shift = rng.uniform(-1, 1, p.d) * (p.decode_threshold() * 0.99)
            x_ref = x + shift
            alpha = quantize(x, p, t)
            got = decode_alpha(encode_alpha(alpha, p, t), x_ref, p, t)
            assert np.array_equal(got, alpha)


def test_roundtrip_beyond_threshold_fails():
    p = QuantParams(q=4, y=1.0, d=6, round_seed=3)
    rng = np.random.default_rng(1)
    mism = 0
    for t in range(50):
        x = rng.uniform(-5, 5, p.d)
        # push the reference well past the guarantee in one coordinate
        x_ref = x.copy()
        x_ref[0] += p.q * p.s
        alpha = quantize(x, p, t)
        got = decode_alpha(encode_alpha(alpha, p, t), x_ref, p, t)
        if not np.array_equal(got, alpha):
            mism += 1
    assert mism == 50


def test_decode_returns_embedded_point():
    p = QuantParams(q=8, y=1.0, d=12, round_seed=11)
    rng = np.random.default_rng(2)
    x = rng.uniform(-4, 4, p.d)
    alpha = quantize(x, p, 5)
    vec = decode(encode(x, p, 5), x, p, 5)
    assert np.allclose(vec, p.lattice_spec(5).embed(alpha))
    assert np.max(np.abs(vec - x)) <= p.s / 2 + 1e-12


def test_shared_offset_error_bounded_by_half_cell():
    p = QuantParams(q=16, y=3.0, d=64, round_seed=13)
    rng = np.random.default_rng(3)
    for t in range(20):
        x = rng.uniform(-20, 20, p.d)
        committed = p.lattice_spec(t).embed(quantize(x, p, t))
        assert np.max(np.abs(committed - x)) <= p.s / 2 + 1e-12


def test_shared_offset_unbiased_over_rounds():
    # the offset draw makes the committed point unbiased for fixed x
    p = QuantParams(q=4, y=1.0, d=8, round_seed=17)
    x = np.full(p.d, 0.123)
    stats = roundtrip_error(x, x, p, trials=4000)
    assert stats.mismatches == 0
    # per-coordinate std of the mean is s/sqrt(12*trials) ~ 0.003
    assert np.max(np.abs(stats.bias)) < 0.02
    assert stats.max_abs_error <= p.s / 2 + 1e-12


def test_stochastic_hull_requires_rng():
    p = QuantParams(q=4, y=1.0, d=4, round_seed=0, mode="stochastic_hull")
    with pytest.raises(ParameterError):
        quantize(np.zeros(4), p, 0)


def test_stochastic_hull_unbiased_and_error_below_cell():
    p = QuantParams(q=6, y=1.0, d=8, round_seed=19, mode="stochastic_hull")
    rng = np.random.default_rng(4)
    x = np.random.default_rng(5).uniform(-2, 2, p.d)
    stats = roundtrip_error(x, x, p, trials=4000, rng=rng)
    assert stats.mismatches == 0
    assert np.max(np.abs(stats.bias)) < 0.02
    assert stats.max_abs_error < p.s


def test_stochastic_hull_grid_has_no_offset():
    p = QuantParams(q=4, y=1.0, d=4, round_seed=0, mode="stochastic_hull")
    assert np.array_equal(p.lattice_spec(9).theta, np.zeros(4))


def test_encoded_vector_bytes_round_trip():
    p = QuantParams(q=8, y=1.0, d=100, round_seed=23)
    x = np.random.default_rng(6).uniform(-3, 3, p.d)
    msg = encode(x, p, 2)
    raw = msg.to_bytes()
    assert len(raw) == (msg.bit_length + 7) // 8
    back = EncodedVector.from_bytes(raw, msg.bit_length, 2)
    assert back == msg


def test_decode_rejects_wrong_width():
    p8 = QuantParams(q=8, y=1.0, d=10, round_seed=0)
    p4 = QuantParams(q=4, y=1.0, d=10, round_seed=0)
    msg = encode(np.zeros(10), p8, 0)
    with pytest.raises(ParameterError):
        decode_alpha(msg, np.zeros(10), p4, 0)


def test_same_round_same_grid_across_instances():
    a = QuantParams(q=8, y=1.0, d=16, round_seed=42)
    b = QuantParams(q=8, y=1.0, d=16, round_seed=42)
    assert np.array_equal(a.lattice_spec(3).theta, b.lattice_spec(3).theta)
    assert not np.array_equal(a.lattice_spec(3).theta, a.lattice_spec(4).theta)
