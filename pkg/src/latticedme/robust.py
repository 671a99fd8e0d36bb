"""Error-detecting codec layer: residues plus a keyed checksum, with escalation.

The plain color-word codec silently decodes to a wrong point when the
decoder's reference is out of range.  Here every message carries the
encoder's residues mod ``r`` together with a k-bit keyed hash of the full
coefficient vector.  A decoder whose candidate fails the checksum replies
Far (one bit), and the encoder escalates: iteration i uses modulus
``r = q ** (2 ** i)``, so the sum of all payloads stays within a factor
two of the final one.  The encoder's lattice point is fixed at iteration
zero and never re-rounded, hence all iterations describe the same point
and a success at any iteration yields the exact point.  A wrong candidate
passes the checksum only with probability ``2**-k`` per iteration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import (
    ColorWord,
    LatticeSpec,
    ParameterError,
    nearest_point,
    nearest_with_color,
    payload_bits,
)
from .quantizer import QuantParams
from .randomness import CHECKSUM, SharedRandomness, int_vector_bytes, keyed_hash_bits

Array = np.ndarray

DEFAULT_K = 32
DEFAULT_R_MAX = 2**20
FAR_BITS = 1


class EscalationError(RuntimeError):
    """Modulus escalation exceeded r_max without agreement."""


def modulus_schedule(q: int, iteration: int, r_max: int = DEFAULT_R_MAX) -> int:
    """Modulus for one iteration: q ** (2 ** i), capped at r_max."""
    if iteration < 0:
        raise ParameterError(f"iteration must be >= 0, got {iteration}")
    r = q ** (2**iteration)
    if r > r_max:
        raise EscalationError(f"modulus {r} exceeds r_max={r_max} at iteration {iteration}")
    return r


@dataclass(frozen=True)
class RobustMessage:
    payload: int       # packed residues mod r
    r: int
    checksum: int      # k-bit keyed hash of the full coefficient vector
    k: int
    iteration: int
    payload_bits: int  # ceil(d * log2(r)), recorded by the sender

    @property
    def bit_length(self) -> int:
        return self.payload_bits + self.k


def _checksum(alpha: Array, shared: SharedRandomness, round_index: int, iteration: int, k: int) -> int:
    key = shared.hash_key(CHECKSUM, round_index, iteration)
    return keyed_hash_bits(int_vector_bytes(alpha), key, k)


@dataclass
class RobustSession:
    """One side of an escalating exchange; both sides keep one in lockstep.

    The encoder side caches its lattice point at first use; the decoder
    side only verifies candidates.  ``transcript`` records the bit cost of
    every message either sent or received by this side, in order.
    """

    params: QuantParams
    round_index: int
    k: int = DEFAULT_K
    r_max: int = DEFAULT_R_MAX
    iteration: int = 0
    transcript: list = field(default_factory=list)
    _alpha: Array | None = None
    _spec: LatticeSpec | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ParameterError(f"k must be >= 1, got {self.k}")
        if self.params.mode != "shared_offset":
            raise ParameterError("robust sessions require shared_offset mode")

    @property
    def spec(self) -> LatticeSpec:
        if self._spec is None:
            self._spec = self.params.lattice_spec(self.round_index)
        return self._spec

    @property
    def shared(self) -> SharedRandomness:
        return SharedRandomness(self.params.round_seed)

    def commit(self, x: Array) -> Array:
        """Fix the encoder's lattice point (first call only)."""
        if self._alpha is None:
            self._alpha = nearest_point(x, self.spec)
        return self._alpha

    def commit_alpha(self, alpha: Array) -> Array:
        if self._alpha is None:
            self._alpha = np.asarray(alpha, dtype=np.int64)
        return self._alpha


def robust_encode(x: Array, session: RobustSession) -> RobustMessage:
    """Message for the session's current iteration; advances nothing."""
    alpha = session.commit(x)
    r = modulus_schedule(session.params.q, session.iteration, session.r_max)
    word = ColorWord(np.mod(alpha, r), r)
    msg = RobustMessage(
        payload=word.packed,
        r=r,
        checksum=_checksum(alpha, session.shared, session.round_index, session.iteration, session.k),
        k=session.k,
        iteration=session.iteration,
        payload_bits=payload_bits(session.params.d, r),
    )
    session.transcript.append(msg.bit_length)
    return msg


def robust_decode(msg: RobustMessage, x_ref: Array, session: RobustSession) -> Array | None:
    """Verified decode: the vector on success, None (meaning Far) on mismatch.

    The candidate is the nearest point to the reference among those whose
    coefficients match the transmitted residues mod r; it is accepted only
    if its checksum agrees.  A Far reply costs one bit (recorded here).
    """
    session.transcript.append(msg.bit_length)
    d = session.params.d
    word = ColorWord.from_packed(msg.payload, msg.r, d)
    candidate = nearest_with_color(x_ref, word, session.spec)
    expect = _checksum(candidate, session.shared, session.round_index, msg.iteration, msg.k)
    if expect == msg.checksum:
        return session.spec.embed(candidate)
    session.transcript.append(FAR_BITS)
    return None


@dataclass(frozen=True)
class AgreementResult:
    vector: Array
    iterations: int          # messages sent (final iteration index + 1)
    moduli: tuple            # modulus used at each iteration
    bits_forward: int        # encoder -> decoder
    bits_back: int           # decoder -> encoder (Far replies)

    @property
    def total_bits(self) -> int:
        return self.bits_forward + self.bits_back


def robust_agreement(
    x_u: Array,
    x_v: Array,
    params: QuantParams,
    round_index: int,
    k: int = DEFAULT_K,
    r_max: int = DEFAULT_R_MAX,
) -> AgreementResult:
    """Run the full escalating exchange from u (holder of x_u) to v.

    Returns v's decoded vector, which equals u's committed lattice point
    unless a checksum collision (probability 2**-k per iteration) slipped
    a wrong candidate through.  Raises EscalationError if the modulus cap
    is hit first.
    """
    enc = RobustSession(params, round_index, k=k, r_max=r_max)
    dec = RobustSession(params, round_index, k=k, r_max=r_max)
    moduli = []
    bits_forward = 0
    bits_back = 0
    while True:
        msg = robust_encode(x_u, enc)
        moduli.append(msg.r)
        bits_forward += msg.bit_length
        got = robust_decode(msg, x_v, dec)
        if got is not None:
            return AgreementResult(
                vector=got,
                iterations=enc.iteration + 1,
                moduli=tuple(moduli),
                bits_forward=bits_forward,
                bits_back=bits_back,
            )
        bits_back += FAR_BITS
        enc.iteration += 1
        dec.iteration += 1
        # raises EscalationError once q ** (2 ** i) would pass r_max
        modulus_schedule(params.q, enc.iteration, r_max)
