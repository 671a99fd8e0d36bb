"""One-iteration mean exchanges for the experiment loops.

Every quantizer choice is wrapped behind the same two calls:

* ``initial(vectors)``: iteration-0 calibration at full precision.  All
  methods pay the same metered cost and all obtain the exact mean, so no
  method starts with an information advantage; distance-budget methods
  additionally seed their y estimate from the exchanged vectors.
* ``step(vectors, t)``: the quantized exchange for iteration t >= 1.

Per-machine estimates are the machines' *actual* decodes; a failed decode
is counted, never patched.  The harness applies the average of the
per-machine estimates so a single model is tracked even through failures.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..baselines import (
    BaselineParams,
    hadamard_uniform_decode,
    hadamard_uniform_encode,
    qsgd_decode,
    qsgd_encode,
)
from ..quantizer import QuantParams, decode_alpha, encode_alpha, quantize
from ..randomness import BASELINE, SharedRandomness
from ..rotation import RotationSpec, rotate, unrotate

Array = np.ndarray

FLOAT_BITS = 64

# multiplier applied to the observed distance, per update rule
RULE_FACTORS = {"scale15": 1.5, "scale3": 3.0, "periodic16": 1.6}
PERIODIC_INTERVAL = 5


@dataclass(frozen=True)
class ExchangeResult:
    est: Array                  # harness-side average of per-machine estimates
    per_machine: Array          # (n, d) actual estimate at each machine
    bits: int                   # total bits sent this iteration, all machines
    decode_failures: int
    y_estimate: float           # nan for methods without a distance budget
    quant_error: float = 0.0    # mean over machines of |repr(v_i) - v_i|^2


def _mean_result(vectors: Array, bits: int, y: float) -> ExchangeResult:
    est = vectors.mean(axis=0)
    per_machine = np.broadcast_to(est, vectors.shape).copy()
    return ExchangeResult(est, per_machine, bits, 0, y)


def _mean_sq(reprs, vectors: Array) -> float:
    errs = [float(np.sum((r - v) ** 2)) for r, v in zip(reprs, vectors)]
    return float(np.mean(errs))


class ExactExchange:
    """Full-precision baseline: every message is d 64-bit floats."""

    def __init__(self, n: int, d: int, seed: int):
        self.n = n
        self.d = d

    def initial(self, vectors: Array) -> ExchangeResult:
        return _mean_result(vectors, 2 * (self.n - 1) * self.d * FLOAT_BITS, float("nan"))

    def step(self, vectors: Array, t: int, probe: Array | None = None) -> ExchangeResult:
        return self.initial(vectors)


class LatticeExchange:
    """Distance-budget codec exchange with a dynamic y estimate.

    n=2 runs a symmetric swap: each machine sends its color word, decodes
    the peer's against its own input, and averages the two lattice points.
    n>2 runs a leader round: gather color words, average decodes, re-encode
    the average on a fresh grid, broadcast.
    """

    def __init__(self, n: int, d: int, q: int, seed: int, rotated: bool, y_rule: str, y_fixed: float):
        self.n = n
        self.q = q
        self.seed = seed
        self.rotated = rotated
        self.y_rule = y_rule
        self.shared = SharedRandomness(seed)
        self.rot = RotationSpec.from_seed(seed, d) if rotated else None
        self.dq = self.rot.d_pad if rotated else d
        self.y = y_fixed if y_rule == "fixed" else float("nan")

    def domain(self, v: Array) -> Array:
        return rotate(v, self.rot) if self.rotated else np.asarray(v, dtype=np.float64)

    def undomain(self, v: Array) -> Array:
        return unrotate(v, self.rot) if self.rotated else v

    def _params(self) -> QuantParams:
        return QuantParams(self.q, self.y, self.dq, round_seed=self.seed)

    def _observe(self, y_obs: float, broadcast: bool) -> int:
        # a vanished observed distance would make the next grid degenerate;
        # keep the current budget instead
        if y_obs > 0:
            self.y = RULE_FACTORS[self.y_rule] * y_obs
        if broadcast:
            return (self.n - 1) * FLOAT_BITS
        return 0

    def initial(self, vectors: Array) -> ExchangeResult:
        n, d = vectors.shape
        bits = 2 * (n - 1) * d * FLOAT_BITS
        if self.y_rule in ("scale15", "scale3"):
            hs = np.stack([self.domain(v) for v in vectors])
            diffs = [
                float(np.max(np.abs(hs[i] - hs[j])))
                for i in range(n)
                for j in range(i + 1, n)
            ]
            bits += self._observe(max(diffs), broadcast=n > 2)
        elif self.y_rule == "periodic16":
            # the probe pair is supplied by the harness at update time;
            # iteration 0 falls back to the exchanged vectors
            h0, h1 = self.domain(vectors[0]), self.domain(vectors[1 % n])
            bits += self._observe(float(np.max(np.abs(h0 - h1))), broadcast=True)
        return _mean_result(vectors, bits, self.y)

    def step(self, vectors: Array, t: int, probe: Array | None = None) -> ExchangeResult:
        n = vectors.shape[0]
        if not (self.y > 0 and np.isfinite(self.y)):
            raise RuntimeError("distance budget y is unset; run initial() first")
        params = self._params()
        y_used = self.y
        hs = np.stack([self.domain(v) for v in vectors])
        if n == 2:
            res = self._step_pair(vectors, hs, params, t)
        else:
            res = self._step_star(vectors, hs, params, t)
        bits = res.bits + self._rule_bits(res, t, probe)
        return ExchangeResult(
            res.est, res.per_machine, bits, res.decode_failures, y_used, res.quant_error
        )

    def _rule_bits(self, res: ExchangeResult, t: int, probe: Array | None) -> int:
        if self.y_rule == "fixed":
            return 0
        if self.y_rule == "periodic16":
            if t % PERIODIC_INTERVAL != 0 or probe is None:
                return 0
            y_obs = float(np.max(np.abs(self.domain(probe[0]) - self.domain(probe[1]))))
            return self._observe(y_obs, broadcast=True)
        # scale15 / scale3 read distances off the committed lattice points,
        # which every machine knows after a successful decode
        y_obs = res.y_estimate
        return self._observe(y_obs, broadcast=self.y_rule == "scale3" and self.n > 2)

    def _step_pair(self, vectors: Array, hs: Array, params: QuantParams, t: int) -> ExchangeResult:
        spec = params.lattice_spec(t)
        a0 = quantize(hs[0], params, t)
        a1 = quantize(hs[1], params, t)
        m0 = encode_alpha(a0, params, t)
        m1 = encode_alpha(a1, params, t)
        d1_at0 = decode_alpha(m1, hs[0], params, t)
        d0_at1 = decode_alpha(m0, hs[1], params, t)
        failures = int(not np.array_equal(d1_at0, a1)) + int(not np.array_equal(d0_at1, a0))
        lam0, lam1 = spec.embed(a0), spec.embed(a1)
        # each machine keeps its own input at full precision and only the
        # peer's contribution passes through the codec
        est0 = 0.5 * (vectors[0] + self.undomain(spec.embed(d1_at0)))
        est1 = 0.5 * (self.undomain(spec.embed(d0_at1)) + vectors[1])
        per_machine = np.stack([est0, est1])
        y_obs = float(np.max(np.abs(lam0 - spec.embed(d1_at0))))
        qerr = _mean_sq([self.undomain(lam0), self.undomain(lam1)], vectors)
        return ExchangeResult(
            per_machine.mean(axis=0), per_machine, m0.bit_length + m1.bit_length,
            failures, y_obs, qerr,
        )

    def _step_star(self, vectors: Array, hs: Array, params: QuantParams, t: int) -> ExchangeResult:
        n = hs.shape[0]
        r_up, r_dn = 2 * t, 2 * t + 1
        leader = self.shared.leader(n, t)
        spec_up = params.lattice_spec(r_up)
        alphas = [quantize(h, params, r_up) for h in hs]
        bits = 0
        decoded = []
        failures = 0
        for i in range(n):
            if i == leader:
                decoded.append(alphas[i])
                continue
            msg = encode_alpha(alphas[i], params, r_up)
            bits += msg.bit_length
            got = decode_alpha(msg, hs[leader], params, r_up)
            failures += int(not np.array_equal(got, alphas[i]))
            decoded.append(got)
        mu_hat = np.stack([spec_up.embed(a) for a in decoded]).mean(axis=0)
        # fresh down-phase grid keeps the rebroadcast unbiased
        down_alpha = quantize(mu_hat, params, r_dn)
        down_msg = encode_alpha(down_alpha, params, r_dn)
        spec_dn = params.lattice_spec(r_dn)
        est_rows = []
        for m in range(n):
            if m == leader:
                got = down_alpha
            else:
                bits += down_msg.bit_length
                got = decode_alpha(down_msg, hs[m], params, r_dn)
                failures += int(not np.array_equal(got, down_alpha))
            est_rows.append(self.undomain(spec_dn.embed(got)))
        ests = np.stack(est_rows)
        pts = [spec_up.embed(a) for a in decoded]
        y_obs = max(
            float(np.max(np.abs(pts[i] - pts[j])))
            for i in range(n)
            for j in range(i + 1, n)
        )
        qerr = _mean_sq(
            [self.undomain(spec_up.embed(a)) for a in alphas], vectors
        )
        return ExchangeResult(ests.mean(axis=0), ests, bits, failures, y_obs, qerr)


class NormBaselineExchange:
    """Norm-scaled codecs (sign-magnitude and range variants, rotated grid)."""

    def __init__(self, n: int, d: int, q: int, seed: int, kind: str):
        if kind not in ("qsgd_l2", "qsgd_range", "hadamard"):
            raise ValueError(f"unknown baseline kind {kind!r}")
        self.n = n
        self.d = d
        self.seed = seed
        self.kind = kind
        self.shared = SharedRandomness(seed)
        # bit parity with a modulus-q lattice message: q/2 magnitude levels
        # plus sign, or q offset levels, all cost log2(q) bits/coordinate
        if kind == "qsgd_l2":
            self.params = BaselineParams(levels=max(2, q // 2), norm_mode="l2")
        else:
            self.params = BaselineParams(levels=max(2, q), norm_mode="coordinate_range")
        self.rot = RotationSpec.from_seed(seed, d) if kind == "hadamard" else None

    def _enc(self, v: Array, rng):
        if self.kind == "hadamard":
            return hadamard_uniform_encode(v, self.params, self.rot, rng)
        return qsgd_encode(v, self.params, rng)

    def _dec(self, msg):
        if self.kind == "hadamard":
            return hadamard_uniform_decode(msg, self.params, self.rot)
        return qsgd_decode(msg, self.params, self.d)

    def initial(self, vectors: Array) -> ExchangeResult:
        n, d = vectors.shape
        return _mean_result(vectors, 2 * (n - 1) * d * FLOAT_BITS, float("nan"))

    def step(self, vectors: Array, t: int, probe: Array | None = None) -> ExchangeResult:
        n = vectors.shape[0]
        if n == 2:
            msgs = [self._enc(vectors[i], self.shared.stream(BASELINE, t, i)) for i in range(2)]
            dec = [self._dec(m) for m in msgs]
            est0 = 0.5 * (vectors[0] + dec[1])
            est1 = 0.5 * (dec[0] + vectors[1])
            per_machine = np.stack([est0, est1])
            bits = msgs[0].bit_length + msgs[1].bit_length
            return ExchangeResult(
                per_machine.mean(axis=0), per_machine, bits, 0, float("nan"),
                _mean_sq(dec, vectors),
            )
        leader = self.shared.leader(n, t)
        bits = 0
        collected = []
        for i in range(n):
            if i == leader:
                collected.append(vectors[i])
                continue
            msg = self._enc(vectors[i], self.shared.stream(BASELINE, t, i))
            bits += msg.bit_length
            collected.append(self._dec(msg))
        mu_hat = np.stack(collected).mean(axis=0)
        down = self._enc(mu_hat, self.shared.stream(BASELINE, t, n))
        down_dec = self._dec(down)
        ests = np.empty_like(vectors)
        for m in range(n):
            if m == leader:
                ests[m] = mu_hat
            else:
                bits += down.bit_length
                ests[m] = down_dec
        return ExchangeResult(
            ests.mean(axis=0), ests, bits, 0, float("nan"), _mean_sq(collected, vectors)
        )


def make_exchange(quantizer: str, n: int, d: int, q: int, seed: int, y_rule: str, y_fixed: float):
    if quantizer == "none":
        return ExactExchange(n, d, seed)
    if quantizer == "lattice":
        return LatticeExchange(n, d, q, seed, rotated=False, y_rule=y_rule, y_fixed=y_fixed)
    if quantizer == "lattice_rotation":
        return LatticeExchange(n, d, q, seed, rotated=True, y_rule=y_rule, y_fixed=y_fixed)
    return NormBaselineExchange(n, d, q, seed, quantizer)
