"""Density matrices, the probability-of-truth functional and Pauli expansions.

Bit convention: basis state |i_1 ... i_m> sits at index sum_t i_t 2^(m - t),
so the LAST tensor factor is the least significant bit. The probability of
truth reads that last qubit.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce
from typing import Mapping, Sequence

import numpy as np

from qop.errors import DomainError, StructuralError

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
CLAMP_TOL = 1e-12

P0 = np.array([[1, 0], [0, 0]], dtype=complex)
P1 = np.array([[0, 0], [0, 1]], dtype=complex)

PAULI = {
    "0": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def as_complex_matrix(mat) -> np.ndarray:
    """Coerce ``mat`` to a finite 2-D complex128 array."""
    arr = np.asarray(mat, dtype=complex)
    if arr.ndim != 2:
        raise StructuralError(f"expected a 2-D matrix, got shape {arr.shape}")
    if arr.size == 0:
        raise StructuralError("empty matrix")
    if not np.all(np.isfinite(arr)):
        raise DomainError("matrix has non-finite entries")
    return arr


def num_qubits(dim: int) -> int:
    """Return m such that dim == 2**m, or raise StructuralError."""
    if dim < 1 or dim & (dim - 1):
        raise StructuralError(f"dimension {dim} is not a power of two")
    return dim.bit_length() - 1


@dataclass(frozen=True)
class ValidationReport:
    hermitian_dev: float
    trace_dev: float
    min_eigenvalue: float

    @property
    def passed(self) -> bool:
        return (
            self.hermitian_dev <= HERMITIAN_TOL
            and self.trace_dev <= TRACE_TOL
            and self.min_eigenvalue >= -PSD_TOL
        )

    def __bool__(self) -> bool:
        return self.passed

    def describe(self) -> str:
        problems = []
        if self.hermitian_dev > HERMITIAN_TOL:
            problems.append(f"not Hermitian (deviation {self.hermitian_dev:.3g})")
        if self.trace_dev > TRACE_TOL:
            problems.append(f"trace off by {self.trace_dev:.3g}")
        if self.min_eigenvalue < -PSD_TOL:
            problems.append(f"negative eigenvalue {self.min_eigenvalue:.3g}")
        return "; ".join(problems) or "valid density matrix"


def validate_density(mat) -> ValidationReport:
    """Measure how far ``mat`` is from being a density matrix.

    Raises StructuralError for non-square or non-power-of-two input; every
    other defect is reported, not raised.
    """
    arr = as_complex_matrix(mat)
    rows, cols = arr.shape
    if rows != cols:
        raise StructuralError(f"density matrix must be square, got {rows}x{cols}")
    num_qubits(rows)
    herm = float(np.max(np.abs(arr - arr.conj().T)))
    trace_dev = float(abs(np.trace(arr) - 1.0))
    min_eig = float(np.linalg.eigvalsh((arr + arr.conj().T) / 2)[0])
    return ValidationReport(herm, trace_dev, min_eig)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """A validated, read-only density matrix on ``qubits`` qubits."""

    mat: np.ndarray

    def __post_init__(self):
        arr = np.array(as_complex_matrix(self.mat), copy=True)
        report = validate_density(arr)
        if not report.passed:
            raise DomainError(f"not a density matrix: {report.describe()}")
        arr.setflags(write=False)
        object.__setattr__(self, "mat", arr)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def qubits(self) -> int:
        return num_qubits(self.dim)

    def __eq__(self, other):
        if not isinstance(other, DensityMatrix):
            return NotImplemented
        return self.mat.shape == other.mat.shape and bool(np.array_equal(self.mat, other.mat))

    def __hash__(self):
        return hash(self.mat.tobytes())

    def __array__(self, dtype=None, copy=None):
        return self.mat if dtype is None else self.mat.astype(dtype)


def make_density_from_prob(lam: float) -> DensityMatrix:
    """Return rho_lambda = (1 - lam) P0 + lam P1."""
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda must lie in [0, 1], got {lam}")
    return DensityMatrix(np.diag([1.0 - lam, lam]).astype(complex))


def make_qubit(alpha: float, beta: complex = 0.0) -> DensityMatrix:
    """Return [[1 - alpha, beta], [conj(beta), alpha]].

    Positivity requires |beta|^2 <= alpha (1 - alpha); it is checked here.
    """
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must lie in [0, 1], got {alpha}")
    bound = alpha * (1.0 - alpha)
    if abs(beta) ** 2 > bound + 1e-12:
        raise DomainError(
            f"|beta|^2 = {abs(beta) ** 2:.6g} exceeds alpha(1 - alpha) = {bound:.6g}; "
            "the matrix would not be positive semidefinite"
        )
    beta = complex(beta)
    return DensityMatrix(np.array([[1.0 - alpha, beta], [beta.conjugate(), alpha]]))


def probability(rho: DensityMatrix) -> float:
    """Probability of truth: tr((I x ... x I x P1) rho).

    Sums the diagonal entries whose last bit is 1.
    """
    p = float(np.sum(np.diagonal(rho.mat)[1::2].real))
    if -CLAMP_TOL <= p < 0.0:
        return 0.0
    if 1.0 < p <= 1.0 + CLAMP_TOL:
        return 1.0
    return p


def tensor(parts: Sequence[DensityMatrix]) -> DensityMatrix:
    """Kronecker product of ``parts`` in list order."""
    if len(parts) == 0:
        raise DomainError("tensor needs at least one factor")
    if len(parts) == 1:
        return parts[0]
    return DensityMatrix(reduce(np.kron, (p.mat for p in parts)))


def tensor_power(rho: DensityMatrix, k: int) -> DensityMatrix:
    if k < 1:
        raise DomainError(f"tensor power needs k >= 1, got {k}")
    return tensor([rho] * k)


def copies_state(states: Sequence[DensityMatrix], k: int) -> DensityMatrix:
    """(x^k sigma_1) x ... x (x^k sigma_n), the input layout of polynomial operations."""
    return tensor([s for s in states for _ in range(k)])


@dataclass(frozen=True)
class PauliCoeffs:
    """Real expansion coefficients keyed by strings over {0, x, y, z}."""

    n: int
    coeffs: Mapping[str, float]

    def __getitem__(self, label: str) -> float:
        return self.coeffs[label]


def _pauli_string(label: str) -> np.ndarray:
    return reduce(np.kron, (PAULI[c] for c in label))


def _labels(n: int):
    return ("".join(t) for t in itertools.product("0xyz", repeat=n))


def pauli_expand(rho: DensityMatrix) -> PauliCoeffs:
    """Coefficients tr(sigma_mu1 x ... x sigma_mun rho) for every Pauli string."""
    n = rho.qubits
    coeffs = {}
    for label in _labels(n):
        val = np.trace(_pauli_string(label) @ rho.mat)
        coeffs[label] = float(val.real)
    return PauliCoeffs(n, coeffs)


def pauli_reconstruct(coeffs: PauliCoeffs | Mapping[str, complex], n: int | None = None) -> DensityMatrix:
    """Inverse of pauli_expand: rho = 2^-n sum_mu P_mu sigma_mu."""
    if isinstance(coeffs, PauliCoeffs):
        n, table = coeffs.n, coeffs.coeffs
    else:
        table = coeffs
        if n is None:
            n = len(next(iter(table)))
    acc = np.zeros((2**n, 2**n), dtype=complex)
    for label, value in table.items():
        if len(label) != n or set(label) - set("0xyz"):
            raise DomainError(f"bad Pauli label {label!r} for n={n}")
        value = complex(value)
        if abs(value.imag) > 1e-10:
            raise DomainError(f"coefficient {label} has imaginary part {value.imag:.3g}")
        acc += value.real * _pauli_string(label)
    return DensityMatrix(acc / 2**n)


def random_qubit(rng: np.random.Generator, diagonal: bool = False, offdiag_frac=None) -> DensityMatrix:
    """Random single-qubit density with a uniformly drawn probability of truth.

    Unless ``diagonal``, the off-diagonal entry has a random phase and a
    magnitude that is a random fraction of the PSD bound.
    """
    alpha = rng.uniform(0.0, 1.0)
    if diagonal:
        return make_qubit(alpha, 0.0)
    frac = rng.uniform(0.1, 1.0) if offdiag_frac is None else offdiag_frac
    radius = frac * np.sqrt(alpha * (1.0 - alpha))
    beta = radius * np.exp(2j * np.pi * rng.uniform())
    return make_qubit(alpha, beta)


def random_density(qubits: int, rng: np.random.Generator) -> DensityMatrix:
    """Random full-rank density matrix from a Ginibre draw."""
    dim = 2**qubits
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    rho = (rho + rho.conj().T) / 2
    return DensityMatrix(rho / np.trace(rho).real)


def matrix_to_json(mat) -> dict:
    """Encode as {"rows", "cols", "entries": [[re, im], ...]} in row-major order."""
    arr = as_complex_matrix(mat)
    rows, cols = arr.shape
    entries = [[float(z.real), float(z.imag)] for z in arr.ravel()]
    return {"rows": rows, "cols": cols, "entries": entries}


def matrix_from_json(obj: Mapping) -> np.ndarray:
    try:
        rows, cols, entries = int(obj["rows"]), int(obj["cols"]), obj["entries"]
    except (KeyError, TypeError, ValueError) as exc:
        raise StructuralError(f"malformed matrix JSON: {exc}") from exc
    if rows < 1 or cols < 1 or len(entries) != rows * cols:
        raise StructuralError(f"matrix JSON has {len(entries)} entries for a {rows}x{cols} matrix")
    arr = np.array([complex(re, im) for re, im in entries], dtype=complex).reshape(rows, cols)
    return as_complex_matrix(arr)
