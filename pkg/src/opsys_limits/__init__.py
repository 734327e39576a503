"""Concrete operator systems, UCP maps, min/max tensor cones and inductive limits."""

from .errors import OperatorSystemError
from .indlimit import (
    InductiveSequence,
    LimitElement,
    LimitStatus,
    LimitVerdict,
    canonical_injection,
    induced_map,
    limit_arith,
    limit_eq,
    limit_positive,
    push_forward,
    universal_map,
)
from .opsys import (
    ConcreteOperatorSystem,
    ConeStatus,
    archimedeanize,
    diagonal_system,
    full_matrix_algebra,
    is_positive,
    new_concrete,
)
from .tensor import MaxCertificate, TensorElement, max_certificate_search, max_generate, min_positive
from .ucp import CpStatus, LinearMap, apply, choi_matrix, is_complete_order_mono, is_ucp
from .uhf import GammaRule, uhf_sequence, verify_order_mono_injection

__version__ = "0.1.0"

__all__ = [
    "OperatorSystemError",
    "InductiveSequence",
    "LimitElement",
    "LimitStatus",
    "LimitVerdict",
    "canonical_injection",
    "induced_map",
    "limit_arith",
    "limit_eq",
    "limit_positive",
    "push_forward",
    "universal_map",
    "ConcreteOperatorSystem",
    "ConeStatus",
    "archimedeanize",
    "diagonal_system",
    "full_matrix_algebra",
    "is_positive",
    "new_concrete",
    "MaxCertificate",
    "TensorElement",
    "max_certificate_search",
    "max_generate",
    "min_positive",
    "CpStatus",
    "LinearMap",
    "apply",
    "choi_matrix",
    "is_complete_order_mono",
    "is_ucp",
    "GammaRule",
    "uhf_sequence",
    "verify_order_mono_injection",
]
