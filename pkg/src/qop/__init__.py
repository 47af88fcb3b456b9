"""Polynomial quantum operations on density matrices.

Build Kraus sets whose probability-of-truth semantics realise polynomials
written in the D_k generator system, and approximate continuous functions
on the unit cube through Bernstein polynomials.
"""
from qop.errors import (
    CapabilityError,
    CoefficientRangeError,
    DegreeError,
    DomainError,
    QopError,
    StructuralError,
    VerificationError,
)

__version__ = "0.1.0"

__all__ = [
    "CapabilityError",
    "CoefficientRangeError",
    "DegreeError",
    "DomainError",
    "QopError",
    "StructuralError",
    "VerificationError",
]
