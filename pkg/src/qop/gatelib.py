"""Golden reference gates: NOT, the eight-operator IAND channel and the
polynomial approximant of the Lukasiewicz conorm x (+) y = min(1, x + y)."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from qop.densmat import PAULI
from qop.dkbasis import DkPolynomial, assemble_dk, product_term_to_dk
from qop.errors import CoefficientRangeError
from qop.krausfab import QuantumOperation, build_polynomial_operation

_H = 1.0 / np.sqrt(2.0)

# 0-based (row, col) of the single 1/sqrt(2) entry of G_1 .. G_8
IAND_ENTRIES = ((0, 0), (0, 1), (0, 2), (2, 0), (2, 1), (2, 2), (3, 3), (1, 3))

# (coefficient, ((a_x, b_x), (a_y, b_y))) for c (1-x)^a_x x^b_x (1-y)^a_y y^b_y
LUKA_TERMS = (
    (Fraction(5, 12), ((1, 1), (0, 0))),  # x(1-x)
    (Fraction(5, 12), ((1, 0), (0, 1))),  # y(1-x)
    (Fraction(5, 12), ((0, 1), (1, 0))),  # x(1-y)
    (Fraction(5, 12), ((0, 0), (1, 1))),  # y(1-y)
    (Fraction(1, 2), ((0, 1), (0, 0))),  # x
    (Fraction(1, 2), ((0, 0), (0, 1))),  # y
)


@dataclass(frozen=True)
class GoldenGate:
    name: str
    op: QuantumOperation
    provenance: str
    M: float = 1.0


def iand_matrices() -> list[np.ndarray]:
    mats = []
    for r, c in IAND_ENTRIES:
        g = np.zeros((4, 4), dtype=complex)
        g[r, c] = _H
        mats.append(g)
    return mats


def not_op() -> QuantumOperation:
    """rho -> sigma_x rho sigma_x."""
    return QuantumOperation(2, 2, dense=[PAULI["x"]], name="NOT")


def iand_op() -> QuantumOperation:
    """Two-qubit channel mapping tau (x) sigma to 1/2 I (x) rho_{p(tau) p(sigma)}."""
    return QuantumOperation(4, 4, dense=iand_matrices(), name="IAND")


def luka_value(x, y):
    """Closed form of the approximant P(x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return 5 / 12 * (x * (1 - x) + y * (1 - x) + x * (1 - y) + y * (1 - y)) + (x + y) / 2


def luka_conorm(x, y):
    return np.minimum(1.0, np.asarray(x, dtype=float) + np.asarray(y, dtype=float))


def luka_term_vectors(k: int = 2, spread: str = "symmetric", M: float = 1.0) -> list[np.ndarray]:
    return [product_term_to_dk(factors, float(c) / M, k, spread) for c, factors in LUKA_TERMS]


def luka_poly(k: int = 2, M: float = 1.0, spread: str = "symmetric") -> DkPolynomial:
    """The approximant P / M ingested term by term into D_k(x, y).

    P itself reaches 16/15 on the square, so with M = 1 no D_k
    representation has all coefficients in [0, 1] and this raises
    CoefficientRangeError. Use ``luka_min_M`` for the smallest admissible M.
    """
    return assemble_dk(2, k, *luka_term_vectors(k, spread, M))


def luka_min_M(k: int = 2, spread: str = "symmetric") -> float:
    """Smallest M >= 1 for which ``luka_poly(k, M, spread)`` is admissible."""
    total = np.sum(luka_term_vectors(k, spread), axis=0)
    return max(1.0, float(total.max()))


def luka_approx_op(k: int = 2, M: float | None = None, spread: str = "symmetric") -> QuantumOperation:
    """Polynomial operation realising P(p(tau), p(sigma)) / M on k copies of each input."""
    M = luka_min_M(k, spread) if M is None else M
    return build_polynomial_operation(luka_poly(k, M, spread), name="LUKA")


def golden_gates() -> dict[str, GoldenGate]:
    M = luka_min_M()
    return {
        "not": GoldenGate("NOT", not_op(), "bit flip: single dense Kraus operator sigma_x"),
        "iand": GoldenGate("IAND", iand_op(), "eight dense 1/sqrt(2) matrix units G_1..G_8"),
        "luka": GoldenGate("LUKA", luka_approx_op(M=M), f"rank-one polynomial operation for P/M, M={M!r}", M),
    }


__all__ = [
    "CoefficientRangeError",
    "GoldenGate",
    "IAND_ENTRIES",
    "LUKA_TERMS",
    "golden_gates",
    "iand_matrices",
    "iand_op",
    "luka_approx_op",
    "luka_conorm",
    "luka_min_M",
    "luka_poly",
    "luka_term_vectors",
    "luka_value",
    "not_op",
]
