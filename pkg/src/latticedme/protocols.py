"""Mean-estimation protocols over a simulated synchronous fault-free network.

Machines are indices into an input matrix; every transfer is metered (the
meter doubles as a structured trace), all coordination randomness derives
from one shared seed, and decode ground truth is available in-process so
silent decode errors are counted rather than hidden.  Costs for one-time
setup (seed distribution) are metered in their own phase and excluded
from headline per-machine counts.

Protocols:

* ``star_mean_estimation``: a seed-chosen hub gathers color words, decodes
  them against its own input, averages in double precision, re-encodes
  under a fresh offset and broadcasts; every machine decodes against its
  own input and ends with the identical point.
* ``tree_mean_estimation``: a sampled subset feeds a binary aggregation
  tree.  Interior nodes decode children against their own inputs, average
  with subtree-leaf weights, and re-encode onto the same offset grid with
  unbiased randomized rounding, so the hop-by-hop estimator stays unbiased
  while identical inputs pass through exactly.  Per machine the traffic is
  hard-capped at four encoded vectors.
* ``variance_reduction``: sets the distance budget from the input noise
  scale (y = 2 sigma sqrt(alpha n)) and delegates to a topology.
* ``robust_variance_reduction``: the star flow where every transfer is an
  escalating checksummed exchange, so out-of-range inputs are detected
  and re-sent at higher modulus instead of corrupting the average.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .lattice import DimensionMismatchError, ParameterError, nearest_point, nearest_with_color, randomized_round
from .quantizer import EncodedVector, QuantParams, decode_alpha, encode_alpha, quantize
from .randomness import STOCH, TREE, SharedRandomness
from .robust import (
    DEFAULT_K,
    DEFAULT_R_MAX,
    FAR_BITS,
    EscalationError,
    RobustSession,
    robust_decode,
    robust_encode,
)

Array = np.ndarray

SETUP_PHASE = "setup"
SEED_BITS = 64


class ProtocolError(RuntimeError):
    """Internal protocol invariant violated (a bug, not a data condition)."""


class BitMeter:
    """Exact per-machine, per-phase bit accounting.

    Every entry records one transfer; aggregates are recomputed from the
    log so the sent/received conservation check is structural.  The log
    is also the protocol trace.
    """

    def __init__(self, n: int):
        self.n = n
        self.entries: list[dict] = []

    def record(self, frm: int, to: int, bits: int, phase: str, kind: str) -> None:
        if not (0 <= frm < self.n and 0 <= to < self.n):
            raise ParameterError(f"machine ids must be in [0, {self.n}), got {frm}->{to}")
        if bits < 0:
            raise ParameterError(f"bits must be >= 0, got {bits}")
        self.entries.append(
            {"phase": phase, "from": frm, "to": to, "bits": int(bits), "kind": kind}
        )

    def _sum(self, side: str, machine: int | None, include_setup: bool) -> int:
        total = 0
        for e in self.entries:
            if not include_setup and e["phase"] == SETUP_PHASE:
                continue
            if machine is not None and e[side] != machine:
                continue
            total += e["bits"]
        return total

    def sent(self, machine: int | None = None, include_setup: bool = False) -> int:
        return self._sum("from", machine, include_setup)

    def received(self, machine: int | None = None, include_setup: bool = False) -> int:
        return self._sum("to", machine, include_setup)

    def phase_totals(self) -> dict:
        out: dict = {}
        for e in self.entries:
            out[e["phase"]] = out.get(e["phase"], 0) + e["bits"]
        return out

    def conserved(self) -> bool:
        """Total sent equals total received, overall and per phase."""
        for include in (False, True):
            if self.sent(include_setup=include) != self.received(include_setup=include):
                return False
        per_phase_sent: dict = {}
        per_phase_recv: dict = {}
        for e in self.entries:
            per_phase_sent[e["phase"]] = per_phase_sent.get(e["phase"], 0) + e["bits"]
            per_phase_recv[e["phase"]] = per_phase_recv.get(e["phase"], 0) + e["bits"]
        return per_phase_sent == per_phase_recv

    def snapshot(self) -> dict:
        return {
            "per_machine_sent": [self.sent(u) for u in range(self.n)],
            "per_machine_received": [self.received(u) for u in range(self.n)],
            "setup_bits": self.sent(include_setup=True) - self.sent(include_setup=False),
            "phase_totals": self.phase_totals(),
            "total_bits": self.sent(),
        }

    def trace_jsonl(self) -> str:
        return "\n".join(json.dumps(e) for e in self.entries)


class SimNetwork:
    """Input matrix plus meter plus the shared randomness handle."""

    def __init__(self, inputs, seed: int):
        x = np.asarray(inputs, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 2:
            raise DimensionMismatchError(
                f"inputs must be (n >= 2, d), got shape {x.shape}"
            )
        self.x = x
        self.n, self.d = x.shape
        self.seed = seed
        self.shared = SharedRandomness(seed)
        self.meter = BitMeter(self.n)

    def send(self, frm: int, to: int, bits: int, phase: str, kind: str = "payload") -> None:
        """Meter one transfer; a machine talking to itself costs nothing."""
        if frm == to:
            self.meter.record(frm, to, 0, phase, "simulated")
        else:
            self.meter.record(frm, to, bits, phase, kind)


@dataclass
class ProtocolResult:
    est: Array | None
    outputs: Array | None       # (n, d) per-machine decoded outputs
    success: bool
    diagnostics: dict
    meter: dict

    def outputs_identical(self) -> bool:
        if self.outputs is None:
            return False
        return bool(np.all(self.outputs == self.outputs[0]))

    def to_json(self) -> str:
        return json.dumps(
            {
                "est": None if self.est is None else self.est.tolist(),
                "success": self.success,
                "diagnostics": _jsonable(self.diagnostics),
                "meter": self.meter,
            }
        )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def _meter_setup(net: SimNetwork) -> None:
    # per-machine caps and meter snapshots are per protocol run, so each
    # run gets a fresh network
    if net.meter.entries:
        raise ProtocolError("protocol runs need a fresh SimNetwork")
    # one seed share from machine 0; all other coordination randomness
    # (offsets, keys, draws) derives from it with no further traffic
    for u in range(1, net.n):
        net.send(0, u, SEED_BITS, SETUP_PHASE, "seed")


def _max_pairwise_linf(x: Array) -> float:
    n = x.shape[0]
    worst = 0.0
    for i in range(n):
        diff = np.abs(x[i + 1 :] - x[i])
        if diff.size:
            worst = max(worst, float(diff.max()))
    return worst


def _machine_rng(net: SimNetwork, round_index: int, tag: int) -> np.random.Generator:
    return net.shared.stream(STOCH, round_index, tag)


def star_mean_estimation(
    net: SimNetwork, params: QuantParams, round_base: int = 0
) -> ProtocolResult:
    """Hub-gather, average, re-encode, broadcast; see the module docstring.

    The hub's own contribution travels for free (it encodes and decodes
    its own input locally, which keeps the estimator's treatment of every
    machine uniform).  Bits per non-hub machine: one payload up, one down.
    """
    if params.d != net.d:
        raise DimensionMismatchError(f"params.d={params.d}, network d={net.d}")
    _meter_setup(net)
    r_up, r_dn = 2 * round_base, 2 * round_base + 1
    leader = net.shared.leader(net.n, round_base)
    spec_up = params.lattice_spec(r_up)
    spec_dn = params.lattice_spec(r_dn)
    bits = params.bit_length

    diagnostics: dict = {
        "leader": leader,
        "y": params.y,
        "max_pairwise_linf": _max_pairwise_linf(net.x),
    }
    diagnostics["assumption_violated"] = bool(
        diagnostics["max_pairwise_linf"] > params.y
    )

    mismatches = 0
    decoded_points = np.empty_like(net.x)
    alphas = []
    for u in range(net.n):
        rng = _machine_rng(net, r_up, u) if params.mode == "stochastic_hull" else None
        alpha = quantize(net.x[u], params, r_up, rng)
        alphas.append(alpha)
        msg = encode_alpha(alpha, params, r_up)
        net.send(u, leader, bits, "up")
        got = decode_alpha(msg, net.x[leader], params, r_up)
        if not np.array_equal(got, alpha):
            mismatches += 1
        decoded_points[u] = spec_up.embed(got)

    mu_hat = decoded_points.mean(axis=0)

    rng_dn = _machine_rng(net, r_dn, leader) if params.mode == "stochastic_hull" else None
    alpha_dn = quantize(mu_hat, params, r_dn, rng_dn)
    msg_dn = encode_alpha(alpha_dn, params, r_dn)
    outputs = np.empty_like(net.x)
    for u in range(net.n):
        net.send(leader, u, bits, "down")
        got = decode_alpha(msg_dn, net.x[u], params, r_dn)
        if not np.array_equal(got, alpha_dn):
            mismatches += 1
        outputs[u] = spec_dn.embed(got)

    diagnostics["decode_mismatches"] = mismatches
    if not net.meter.conserved():
        raise ProtocolError("bit conservation violated")
    result = ProtocolResult(
        est=outputs[leader],
        outputs=outputs,
        success=mismatches == 0,
        diagnostics=diagnostics,
        meter=net.meter.snapshot(),
    )
    result.success = result.success and result.outputs_identical()
    diagnostics["outputs_identical"] = result.outputs_identical()
    return result


def _tree_quant_params(net: SimNetwork, m: int, y: float) -> QuantParams:
    # side length 2 y / m^2 at modulus m^3: re-encoded hops gain distance
    # budget ~ m y while each hop's added error stays ~ y / m^2
    q_t = m**3
    y_t = y * (q_t - 1) / m**2
    return QuantParams(q=q_t, y=y_t, d=net.d, round_seed=net.seed)


def tree_mean_estimation(
    net: SimNetwork, m: int, y: float, round_base: int = 0
) -> ProtocolResult:
    """Sampled-subset aggregation over a binary tree, then tree broadcast.

    ``min(m, n)`` machines are sampled as leaves of a complete binary
    tree (any size; leaves sit on at most two adjacent depths, and
    subtree-leaf weights make the root's value the exact sample mean of
    the decoded leaves).  Interior roles go to distinct machines, one
    each, so with the binary broadcast no machine moves more than four
    encoded vectors.
    """
    if m < 2:
        raise ParameterError(f"m must be >= 2, got {m}")
    _meter_setup(net)
    m_eff = min(m, net.n)
    params_t = _tree_quant_params(net, m, y)
    bits = params_t.bit_length
    r0 = 2 * round_base
    spec0 = params_t.lattice_spec(r0)

    perm_leaves = net.shared.stream(TREE, round_base, 0).permutation(net.n)[:m_eff]
    perm_internal = net.shared.stream(TREE, round_base, 1).permutation(net.n)[: m_eff - 1]

    total_nodes = 2 * m_eff - 1
    first_leaf = m_eff - 1
    node_machine = np.empty(total_nodes, dtype=np.int64)
    node_machine[:first_leaf] = perm_internal
    node_machine[first_leaf:] = perm_leaves

    weights = np.zeros(total_nodes)
    weights[first_leaf:] = 1.0

    mismatches = 0
    node_alpha: list = [None] * total_nodes
    for j in range(total_nodes - 1, -1, -1):
        mach = int(node_machine[j])
        if j >= first_leaf:
            alpha = nearest_point(net.x[mach], spec0)
        else:
            c1, c2 = 2 * j + 1, 2 * j + 2
            decoded = []
            for c in (c1, c2):
                msg = encode_alpha(node_alpha[c], params_t, r0)
                net.send(int(node_machine[c]), mach, bits, "up")
                got = decode_alpha(msg, net.x[mach], params_t, r0)
                if not np.array_equal(got, node_alpha[c]):
                    mismatches += 1
                decoded.append(spec0.embed(got))
            w1, w2 = weights[c1], weights[c2]
            weights[j] = w1 + w2
            a_v = (w1 * decoded[0] + w2 * decoded[1]) / (w1 + w2)
            alpha = randomized_round(a_v, spec0, _machine_rng(net, round_base, j))
        node_alpha[j] = alpha

    root_mach = int(node_machine[0])
    msg_b = encode_alpha(node_alpha[0], params_t, r0)

    order = [root_mach] + [u for u in range(net.n) if u != root_mach]
    outputs = np.empty_like(net.x)
    for pos in range(1, net.n):
        net.send(order[(pos - 1) // 2], order[pos], bits, "down")
    for u in range(net.n):
        got = decode_alpha(msg_b, net.x[u], params_t, r0)
        if not np.array_equal(got, node_alpha[0]):
            mismatches += 1
        outputs[u] = spec0.embed(got)

    cap = 4 * bits
    for u in range(net.n):
        if net.meter.sent(u) > cap or net.meter.received(u) > cap:
            raise ProtocolError(
                f"machine {u} moved more than {cap} bits "
                f"(sent {net.meter.sent(u)}, received {net.meter.received(u)})"
            )
    if not net.meter.conserved():
        raise ProtocolError("bit conservation violated")

    diagnostics = {
        "m": m,
        "m_eff": m_eff,
        "sampled": perm_leaves.tolist(),
        "root_machine": root_mach,
        "decode_mismatches": mismatches,
        "per_machine_cap_bits": cap,
        "y": y,
    }
    result = ProtocolResult(
        est=outputs[root_mach],
        outputs=outputs,
        success=mismatches == 0,
        diagnostics=diagnostics,
        meter=net.meter.snapshot(),
    )
    result.success = result.success and result.outputs_identical()
    diagnostics["outputs_identical"] = result.outputs_identical()
    return result


def variance_reduction(
    net: SimNetwork,
    sigma: float,
    alpha: float | None = None,
    q: int | None = None,
    topology: str = "star",
    preset: str | None = None,
    round_base: int = 0,
) -> ProtocolResult:
    """Mean estimation with the distance budget set from the noise scale.

    Inputs are assumed unbiased around a common center with per-input
    variance at most sigma**2; the budget y = 2 sigma sqrt(alpha n) then
    covers all pairwise distances except with probability about 1/alpha.
    ``preset="optimal"`` picks alpha = n and q = n**2 * alpha, the point
    where quantization noise is negligible against sampling noise.
    """
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    n = net.n
    if preset == "optimal":
        alpha = float(n)
        q = n**2 * n
    elif preset is not None:
        raise ParameterError(f"unknown preset {preset!r}")
    if alpha is None or q is None:
        raise ParameterError("alpha and q are required unless a preset is given")
    if alpha <= 0:
        raise ParameterError(f"alpha must be positive, got {alpha}")
    y = 2.0 * sigma * np.sqrt(alpha * n)

    if topology == "star":
        params = QuantParams(q=int(q), y=y, d=net.d, round_seed=net.seed)
        result = star_mean_estimation(net, params, round_base)
    elif topology == "tree":
        result = tree_mean_estimation(net, max(2, int(q)), y, round_base)
    else:
        raise ParameterError(f"topology must be 'star' or 'tree', got {topology!r}")
    result.diagnostics.update(
        {"sigma": sigma, "alpha": alpha, "q": int(q), "y": y, "topology": topology}
    )
    return result


def robust_variance_reduction(
    net: SimNetwork,
    sigma: float,
    q: int,
    k: int = DEFAULT_K,
    r_max: int = DEFAULT_R_MAX,
    round_base: int = 0,
) -> ProtocolResult:
    """Star variance reduction where every transfer is checksummed.

    Side length is sigma-scaled (s = 2 sigma / (q - 1)); a machine whose
    input breaks the distance assumption triggers Far replies and modulus
    escalation on its own pairwise session only, and the pair retries
    until the checksum passes (the retry bits all land in the meter).
    The hub encodes its average once; the broadcast sessions all carry
    that same point, so machines finish bit-identical.
    """
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    params = QuantParams(q=q, y=sigma, d=net.d, round_seed=net.seed)
    _meter_setup(net)
    r_up, r_dn = 2 * round_base, 2 * round_base + 1
    leader = net.shared.leader(net.n, round_base)
    spec_up = params.lattice_spec(r_up)
    spec_dn = params.lattice_spec(r_dn)

    diagnostics: dict = {
        "leader": leader,
        "s": params.s,
        "far_rounds": 0,
        "iterations_by_machine": [0] * net.n,
        "collisions": 0,
    }

    def run_pair(x_src: Array, src: int, dst: int, round_index: int, phase: str,
                 committed: Array | None = None) -> Array:
        enc = RobustSession(params, round_index, k=k, r_max=r_max)
        dec = RobustSession(params, round_index, k=k, r_max=r_max)
        if committed is not None:
            enc.commit_alpha(committed)
        truth = enc.commit(x_src)
        session_machine = src if phase == "up" else dst
        while True:
            msg = robust_encode(x_src, enc)
            net.send(src, dst, msg.bit_length, phase, "robust-payload")
            got = robust_decode(msg, net.x[dst], dec)
            diagnostics["iterations_by_machine"][session_machine] = max(
                diagnostics["iterations_by_machine"][session_machine],
                enc.iteration + 1,
            )
            if got is not None:
                # ground truth available in-process: a checksum collision
                # that admitted a wrong point is counted, not hidden
                if not np.array_equal(got, enc.spec.embed(truth)):
                    diagnostics["collisions"] += 1
                return got
            diagnostics["far_rounds"] += 1
            net.send(dst, src, FAR_BITS, phase, "far")
            enc.iteration += 1
            dec.iteration += 1

    decoded_points = np.empty_like(net.x)
    try:
        for u in range(net.n):
            if u == leader:
                decoded_points[u] = spec_up.embed(nearest_point(net.x[u], spec_up))
                net.send(u, u, 0, "up")
                continue
            decoded_points[u] = run_pair(net.x[u], u, leader, r_up, "up")

        grad_hat = decoded_points.mean(axis=0)
        alpha_b = nearest_point(grad_hat, spec_dn)
        outputs = np.empty_like(net.x)
        for u in range(net.n):
            if u == leader:
                outputs[u] = spec_dn.embed(alpha_b)
                net.send(u, u, 0, "down")
                continue
            outputs[u] = run_pair(grad_hat, leader, u, r_dn, "down", committed=alpha_b)
    except EscalationError as exc:
        diagnostics["escalation_failed"] = str(exc)
        return ProtocolResult(
            est=None,
            outputs=None,
            success=False,
            diagnostics=diagnostics,
            meter=net.meter.snapshot(),
        )

    if not net.meter.conserved():
        raise ProtocolError("bit conservation violated")
    result = ProtocolResult(
        est=outputs[leader],
        outputs=outputs,
        success=diagnostics["collisions"] == 0,
        diagnostics=diagnostics,
        meter=net.meter.snapshot(),
    )
    result.success = result.success and result.outputs_identical()
    diagnostics["outputs_identical"] = result.outputs_identical()
    return result
