"""Lattice-quantized distributed mean estimation.

Compression for distributed aggregation whose error scales with the
distance between machines' inputs instead of the inputs' norms: vectors
are rounded to a shared shifted lattice and only short color words (or,
in the sublinear regime, a constant-size random color) cross the wire.
"""

from .backend import BACKEND
from .lattice import (
    CapacityError,
    ColorWord,
    DimensionMismatchError,
    LatticeSpec,
    ParameterError,
    color_mod_q,
    count_points_in_ball,
    nearest_point,
    nearest_with_color,
    pack_residues,
    payload_bits,
    randomized_round,
    unpack_residues,
)
from .quantizer import EncodedVector, QuantParams, decode, encode, quantize, roundtrip_error
from .rotation import RotationSpec, fwht, rotate, unrotate
from .robust import (
    AgreementResult,
    EscalationError,
    RobustMessage,
    RobustSession,
    modulus_schedule,
    robust_agreement,
    robust_decode,
    robust_encode,
)
from .sublinear import (
    DecodeFailureError,
    IterationCapError,
    SublinearMessage,
    SublinearParams,
    sublinear_decode,
    sublinear_encode,
    sublinear_variance_sim,
)
from .protocols import (
    BitMeter,
    ProtocolError,
    ProtocolResult,
    SimNetwork,
    robust_variance_reduction,
    star_mean_estimation,
    tree_mean_estimation,
    variance_reduction,
)
from .baselines import (
    BaselineParams,
    QsgdMessage,
    RotatedUniformMessage,
    hadamard_uniform_decode,
    hadamard_uniform_encode,
    qsgd_decode,
    qsgd_encode,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "AgreementResult",
    "BaselineParams",
    "BitMeter",
    "CapacityError",
    "ColorWord",
    "DecodeFailureError",
    "DimensionMismatchError",
    "EncodedVector",
    "EscalationError",
    "IterationCapError",
    "LatticeSpec",
    "ParameterError",
    "ProtocolError",
    "ProtocolResult",
    "QsgdMessage",
    "QuantParams",
    "RobustMessage",
    "RobustSession",
    "RotatedUniformMessage",
    "RotationSpec",
    "SimNetwork",
    "SublinearMessage",
    "SublinearParams",
    "color_mod_q",
    "count_points_in_ball",
    "decode",
    "encode",
    "fwht",
    "hadamard_uniform_decode",
    "hadamard_uniform_encode",
    "modulus_schedule",
    "nearest_point",
    "nearest_with_color",
    "pack_residues",
    "payload_bits",
    "quantize",
    "qsgd_decode",
    "qsgd_encode",
    "randomized_round",
    "robust_agreement",
    "robust_decode",
    "robust_encode",
    "robust_variance_reduction",
    "rotate",
    "roundtrip_error",
    "star_mean_estimation",
    "sublinear_decode",
    "sublinear_encode",
    "sublinear_variance_sim",
    "tree_mean_estimation",
    "unpack_residues",
    "unrotate",
    "variance_reduction",
]
