"""Norm-scaled baseline quantizers: formats, bit costs, unbiasedness."""

import numpy as np
import pytest

from latticedme.baselines import (
    BaselineParams,
    hadamard_uniform_decode,
    hadamard_uniform_encode,
    qsgd_decode,
    qsgd_encode,
)
from latticedme.lattice import ParameterError
from latticedme.rotation import RotationSpec


def test_params_validation():
    with pytest.raises(ParameterError):
        BaselineParams(levels=1)
    with pytest.raises(ParameterError):
        BaselineParams(levels=4, norm_mode="linf")
    with pytest.raises(ParameterError):
        BaselineParams(levels=4, bucket_size=0)


def test_bits_per_coordinate():
    assert BaselineParams(levels=4, norm_mode="l2").bits_per_coordinate() == 3
    assert BaselineParams(levels=8, norm_mode="coordinate_range").bits_per_coordinate() == 3
    assert BaselineParams(levels=2, norm_mode="l2").bits_per_coordinate() == 2


def test_l2_bit_length_formula():
    d = 50
    p = BaselineParams(levels=4, norm_mode="l2")
    msg = qsgd_encode(np.random.default_rng(0).standard_normal(d), p, np.random.default_rng(1))
    assert msg.bit_length == d * 3 + 64


def test_range_bit_length_formula():
    d = 50
    p = BaselineParams(levels=8, norm_mode="coordinate_range")
    msg = qsgd_encode(np.random.default_rng(0).standard_normal(d), p, np.random.default_rng(1))
    assert msg.bit_length == d * 3 + 128
    assert msg.signs is None


def test_l2_round_trip_error_bounded():
    d = 100
    p = BaselineParams(levels=16, norm_mode="l2")
    rng = np.random.default_rng(2)
    x = np.random.default_rng(3).standard_normal(d)
    y = qsgd_decode(qsgd_encode(x, p, rng), p, d)
    # per-coordinate error at most one grid step of the l2 scale
    assert np.max(np.abs(y - x)) <= np.linalg.norm(x) / (p.levels - 1) + 1e-12


def test_l2_unbiased():
    d = 20
    p = BaselineParams(levels=4, norm_mode="l2")
    rng = np.random.default_rng(4)
    x = np.random.default_rng(5).standard_normal(d)
    acc = np.zeros(d)
    n = 3000
    for _ in range(n):
        acc += qsgd_decode(qsgd_encode(x, p, rng), p, d)
    err = acc / n - x
    step = np.linalg.norm(x) / (p.levels - 1)
    # mean error per coordinate shrinks as 1/sqrt(n) of one step
    assert np.max(np.abs(err)) < 4 * step / np.sqrt(n) * 3


def test_range_unbiased():
    d = 20
    p = BaselineParams(levels=8, norm_mode="coordinate_range")
    rng = np.random.default_rng(6)
    x = np.random.default_rng(7).uniform(-3, 3, d)
    acc = np.zeros(d)
    n = 3000
    for _ in range(n):
        acc += qsgd_decode(qsgd_encode(x, p, rng), p, d)
    span = x.max() - x.min()
    step = span / (p.levels - 1)
    assert np.max(np.abs(acc / n - x)) < 4 * step / np.sqrt(n) * 3


def test_range_endpoints_exact():
    p = BaselineParams(levels=4, norm_mode="coordinate_range")
    x = np.array([1.0, 5.0, 3.0, 1.0])
    rng = np.random.default_rng(8)
    y = qsgd_decode(qsgd_encode(x, p, rng), p, 4)
    assert y[0] == pytest.approx(1.0)
    assert y[1] == pytest.approx(5.0)


def test_zero_vector_is_fixed_point():
    for mode in ("l2", "coordinate_range"):
        p = BaselineParams(levels=4, norm_mode=mode)
        y = qsgd_decode(qsgd_encode(np.zeros(6), p, np.random.default_rng(9)), p, 6)
        assert np.array_equal(y, np.zeros(6))


def test_bucketing_adds_scale_floats():
    d = 10
    p = BaselineParams(levels=4, norm_mode="l2", bucket_size=3)
    msg = qsgd_encode(np.random.default_rng(10).standard_normal(d), p, np.random.default_rng(11))
    assert len(msg.scales) == 4  # buckets of 3,3,3,1
    assert msg.bit_length == d * 3 + 4 * 64
    y = qsgd_decode(msg, p, d)
    assert y.shape == (d,)


def test_bucketing_tightens_ranges():
    # one large coordinate should not inflate the error of a distant bucket
    d = 8
    x = np.zeros(d)
    x[0] = 100.0
    x[4:] = np.array([0.1, 0.2, 0.3, 0.4])
    whole = BaselineParams(levels=4, norm_mode="l2")
    split = BaselineParams(levels=4, norm_mode="l2", bucket_size=4)
    rng = np.random.default_rng(12)
    err_whole = np.abs(qsgd_decode(qsgd_encode(x, whole, rng), whole, d)[4:] - x[4:]).max()
    errs = [
        np.abs(qsgd_decode(qsgd_encode(x, split, rng), split, d)[4:] - x[4:]).max()
        for _ in range(20)
    ]
    assert max(errs) < 0.6 / 3 + 1e-9  # within one step of the small bucket's norm
    assert err_whole <= 100.0 * np.sqrt(1.0002) / 3 + 1e-9


def test_rotated_uniform_round_trip():
    d = 30
    p = BaselineParams(levels=16)
    spec = RotationSpec.from_seed(5, d)
    rng = np.random.default_rng(13)
    x = np.random.default_rng(14).standard_normal(d)
    msg = hadamard_uniform_encode(x, p, spec, rng)
    assert msg.bit_length == spec.d_pad * 4 + 128
    y = hadamard_uniform_decode(msg, p, spec)
    assert y.shape == (d,)
    # rotated-domain step bounds the rotated-domain error; l2 is preserved
    step = (msg.hi - msg.lo) / (p.levels - 1)
    assert np.linalg.norm(y - x) <= step * np.sqrt(spec.d_pad) + 1e-9


def test_rotated_uniform_unbiased():
    d = 16
    p = BaselineParams(levels=4)
    spec = RotationSpec.from_seed(6, d)
    rng = np.random.default_rng(15)
    x = np.random.default_rng(16).standard_normal(d)
    acc = np.zeros(d)
    n = 3000
    for _ in range(n):
        acc += hadamard_uniform_decode(hadamard_uniform_encode(x, p, spec, rng), p, spec)
    assert np.max(np.abs(acc / n - x)) < 0.1


def test_rotated_uniform_dimension_check():
    from latticedme.lattice import DimensionMismatchError
    from latticedme.baselines import RotatedUniformMessage

    p = BaselineParams(levels=4)
    spec = RotationSpec.from_seed(0, 10)
    msg = RotatedUniformMessage(np.zeros(8, dtype=np.int64), 0.0, 1.0, 0)
    with pytest.raises(DimensionMismatchError):
        hadamard_uniform_decode(msg, p, spec)
