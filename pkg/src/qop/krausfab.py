"""Kraus sets for polynomial quantum operations.

A polynomial P = sum_y a_y y over D_k(x_1..x_n) becomes a channel on nk
qubits built from rank-one Kraus operators. For every input diagonal
position j and every output row r:

* odd r (truth rows):   scale sqrt(a_j / 2^(nk-1)) at entry (r, j)
* even r (falsity rows): scale sqrt((1 - a_j) / 2^(nk-1)) at entry (r, j)

On (x^k s_1) x ... x (x^k s_n) the channel outputs
(I / 2^(nk-1))^{x(nk-1)} x rho_P(p(s_1), ..., p(s_n)).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

from qop.densmat import (
    PSD_TOL,
    DensityMatrix,
    as_complex_matrix,
    matrix_from_json,
    matrix_to_json,
    num_qubits,
)
from qop.dkbasis import DkPolynomial, eval_dk
from qop.errors import CapabilityError, DomainError, StructuralError, VerificationError

COMPLETENESS_TOL = 1e-12
CHOI_MAX_DIM = 2**4
MATERIALIZE_MAX = 2**22
STRUCTURED_ABOVE = 2**20
CLOSED_FORM_MAX_DIM = 2**10


@dataclass(frozen=True)
class RankOneKraus:
    """The matrix scale * E_{row, col} of size dim x dim."""

    dim: int
    scale: float
    row: int
    col: int

    def __post_init__(self):
        if not self.scale > 0:
            raise DomainError(f"rank-one Kraus scale must be positive, got {self.scale}")
        if not (0 <= self.row < self.dim and 0 <= self.col < self.dim):
            raise StructuralError(f"entry ({self.row}, {self.col}) outside a {self.dim}x{self.dim} matrix")

    def to_dense(self) -> np.ndarray:
        mat = np.zeros((self.dim, self.dim), dtype=complex)
        mat[self.row, self.col] = self.scale
        return mat


def _polynomial_rank_one(p: DkPolynomial) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    dim = p.dim
    half = 2 ** (p.slots - 1)
    cols = np.repeat(np.arange(dim), dim)
    rows = np.tile(np.arange(dim), dim)
    a = p.coeffs[cols]
    scales = np.where(rows % 2 == 1, np.sqrt(a / half), np.sqrt((1.0 - a) / half))
    keep = scales > 0
    return scales[keep], rows[keep], cols[keep]


class QuantumOperation:
    """A channel given by Kraus operators, each rank-one or dense.

    Rank-one operators are stored as parallel arrays (scales, rows, cols).
    Operations built from a DkPolynomial keep it as ``source`` and only
    materialise their rank-one arrays on demand.
    """

    def __init__(
        self,
        dim_in: int,
        dim_out: int | None = None,
        rank_one: Iterable[RankOneKraus] | tuple[Sequence, Sequence, Sequence] | None = None,
        dense: Iterable = (),
        check: bool = True,
        source: DkPolynomial | None = None,
        name: str | None = None,
    ):
        dim_out = dim_in if dim_out is None else dim_out
        num_qubits(dim_in)
        num_qubits(dim_out)
        self.dim_in = int(dim_in)
        self.dim_out = int(dim_out)
        self.source = source
        self.name = name
        self._rank_one = None
        if rank_one is not None:
            self._rank_one = self._pack_rank_one(rank_one)
        elif source is None:
            self._rank_one = (np.zeros(0), np.zeros(0, dtype=int), np.zeros(0, dtype=int))
        dense_ops = []
        for mat in dense:
            arr = as_complex_matrix(mat)
            if arr.shape != (self.dim_out, self.dim_in):
                raise StructuralError(f"dense Kraus operator of shape {arr.shape}, expected {(self.dim_out, self.dim_in)}")
            arr = arr.copy()
            arr.setflags(write=False)
            dense_ops.append(arr)
        self.dense = tuple(dense_ops)
        if check:
            dev = check_completeness(self)
            if dev > COMPLETENESS_TOL:
                raise VerificationError(f"Kraus set is incomplete: max |sum A^dag A - I| = {dev:.3g}")

    def _pack_rank_one(self, rank_one):
        if isinstance(rank_one, tuple) and len(rank_one) == 3 and not isinstance(rank_one[0], RankOneKraus):
            scales, rows, cols = (np.asarray(v) for v in rank_one)
        else:
            items = list(rank_one)
            for r in items:
                if r.dim != self.dim_in or r.dim != self.dim_out:
                    raise StructuralError(f"rank-one operator of dim {r.dim} in a {self.dim_out}x{self.dim_in} channel")
            scales = np.array([r.scale for r in items], dtype=float)
            rows = np.array([r.row for r in items], dtype=int)
            cols = np.array([r.col for r in items], dtype=int)
        scales = scales.astype(float)
        rows = rows.astype(int)
        cols = cols.astype(int)
        if not (scales.shape == rows.shape == cols.shape):
            raise StructuralError("rank-one scale/row/col arrays differ in length")
        if np.any(~np.isfinite(scales)) or np.any(scales <= 0):
            raise DomainError("rank-one Kraus scales must be finite and positive")
        if scales.size and (rows.min() < 0 or rows.max() >= self.dim_out or cols.min() < 0 or cols.max() >= self.dim_in):
            raise StructuralError("rank-one Kraus entry outside the channel dimensions")
        for v in (scales, rows, cols):
            v.setflags(write=False)
        return scales, rows, cols

    @classmethod
    def from_polynomial(cls, p: DkPolynomial, name: str | None = None) -> "QuantumOperation":
        return cls(p.dim, p.dim, check=True, source=p, name=name)

    @property
    def rank_one_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        if self._rank_one is None:
            if self.rank_one_count > MATERIALIZE_MAX:
                raise CapabilityError(
                    f"{self.rank_one_count} rank-one operators exceed the materialisation cap {MATERIALIZE_MAX}; "
                    "use the closed form or the structured application path"
                )
            self._rank_one = self._pack_rank_one(_polynomial_rank_one(self.source))
        return self._rank_one

    @property
    def is_structured(self) -> bool:
        """True when the rank-one part is too large to materialise and is
        handled through ``source`` instead."""
        return self._rank_one is None and self.rank_one_count > STRUCTURED_ABOVE

    @property
    def rank_one_count(self) -> int:
        if self._rank_one is not None:
            return int(self._rank_one[0].size)
        a = self.source.coeffs
        half = 2 ** (self.source.slots - 1)
        return int(half * (np.count_nonzero(a > 0) + np.count_nonzero(a < 1)))

    @property
    def kraus_count(self) -> int:
        return self.rank_one_count + len(self.dense)

    @property
    def kraus(self) -> list:
        """All Kraus operators: RankOneKraus items, then dense arrays."""
        scales, rows, cols = self.rank_one_arrays
        ops: list = [RankOneKraus(self.dim_in, float(s), int(r), int(c)) for s, r, c in zip(scales, rows, cols)]
        return ops + list(self.dense)

    def iter_dense(self) -> Iterator[np.ndarray]:
        for op in self.kraus:
            yield op.to_dense() if isinstance(op, RankOneKraus) else op

    def act(self, x) -> np.ndarray:
        """Linear action sum_i A_i X A_i^dag on an arbitrary matrix X."""
        x = as_complex_matrix(x)
        if x.shape != (self.dim_in, self.dim_in):
            raise StructuralError(f"input of shape {x.shape} for a channel on dimension {self.dim_in}")
        out = np.zeros((self.dim_out, self.dim_out), dtype=complex)
        diag = np.diagonal(x)
        if self.is_structured:
            a = self.source.coeffs
            half = 2 ** (self.source.slots - 1)
            truth = np.dot(a, diag) / half
            false = np.dot(1.0 - a, diag) / half
            idx = np.arange(self.dim_out)
            out[idx, idx] = np.where(idx % 2 == 1, truth, false)
        else:
            scales, rows, cols = self.rank_one_arrays
            out_diag = np.zeros(self.dim_out, dtype=complex)
            np.add.at(out_diag, rows, scales**2 * diag[cols])
            out[np.arange(self.dim_out), np.arange(self.dim_out)] += out_diag
        for a_op in self.dense:
            out += a_op @ x @ a_op.conj().T
        return out

    def to_json(self, include_source: bool = True) -> dict:
        scales, rows, cols = self.rank_one_arrays
        obj = {
            "dim_in": self.dim_in,
            "dim_out": self.dim_out,
            "rank_one": [
                {"scale": float(s), "row": int(r), "col": int(c)} for s, r, c in zip(scales, rows, cols)
            ],
            "dense": [matrix_to_json(m) for m in self.dense],
        }
        if self.name:
            obj["name"] = self.name
        if include_source and self.source is not None:
            obj["polynomial"] = self.source.to_json()
        return obj

    @classmethod
    def from_json(cls, obj: Mapping, check: bool = True) -> "QuantumOperation":
        """Rebuild from Kraus JSON. The explicit operator lists are authoritative;
        an embedded "polynomial" is kept only as metadata."""
        try:
            dim_in = int(obj["dim_in"])
            dim_out = int(obj.get("dim_out", dim_in))
            entries = obj.get("rank_one", [])
            scales = np.array([float(e["scale"]) for e in entries], dtype=float)
            rows = np.array([int(e["row"]) for e in entries], dtype=int)
            cols = np.array([int(e["col"]) for e in entries], dtype=int)
            dense = [matrix_from_json(m) for m in obj.get("dense", [])]
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, (StructuralError, DomainError)):
                raise
            raise StructuralError(f"malformed Kraus JSON: {exc}") from exc
        source = DkPolynomial.from_json(obj["polynomial"]) if "polynomial" in obj else None
        return cls(dim_in, dim_out, rank_one=(scales, rows, cols), dense=dense, check=check,
                   source=source, name=obj.get("name"))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1) + "\n"

    def __repr__(self):
        label = f" {self.name!r}" if self.name else ""
        return f"QuantumOperation{label}(dim={self.dim_in}, kraus={self.kraus_count})"


def build_polynomial_operation(p: DkPolynomial, name: str | None = None) -> QuantumOperation:
    """The channel whose probability of truth realises ``p`` on tensor-power inputs."""
    return QuantumOperation.from_polynomial(p, name=name)


def apply(op: QuantumOperation, rho: DensityMatrix) -> DensityMatrix:
    """sum_i A_i rho A_i^dag."""
    if rho.dim != op.dim_in:
        raise StructuralError(f"state of dimension {rho.dim} does not match channel input {op.dim_in}")
    return DensityMatrix(op.act(rho.mat))


def closed_form_diagonal(p: DkPolynomial, probs) -> np.ndarray:
    """Diagonal of (I / 2^(nk-1)) x rho_P(probs); every other entry is zero."""
    val = eval_dk(p, probs)
    half = 2 ** (p.slots - 1)
    return np.tile([1.0 - val, val], half) / half


def apply_closed_form(p: DkPolynomial, probs) -> DensityMatrix:
    """Output state predicted without touching any Kraus operator."""
    if p.dim > CLOSED_FORM_MAX_DIM:
        raise CapabilityError(f"dimension {p.dim} too large for a dense state; use closed_form_diagonal")
    return DensityMatrix(np.diag(closed_form_diagonal(p, probs)).astype(complex))


def _rank_one_completeness(op: QuantumOperation) -> np.ndarray:
    """Diagonal of the rank-one part of sum_i A_i^dag A_i.

    Each rank-one operator contributes scale^2 at (col, col); structured
    polynomial operations are bucketed by column without materialising.
    """
    if op.is_structured:
        p = op.source
        half = 2 ** (p.slots - 1)
        a = p.coeffs
        # half truth rows each contribute (sqrt(a/half))^2, likewise for falsity rows
        return half * np.sqrt(a / half) ** 2 + half * np.sqrt((1.0 - a) / half) ** 2
    scales, _, cols = op.rank_one_arrays
    return np.bincount(cols, weights=scales**2, minlength=op.dim_in)


def completeness_sum(op: QuantumOperation) -> np.ndarray:
    """sum_i A_i^dag A_i as a dense matrix."""
    total = np.diag(_rank_one_completeness(op)).astype(complex)
    for a_op in op.dense:
        total += a_op.conj().T @ a_op
    return total


def check_completeness(op: QuantumOperation) -> float:
    """max |(sum_i A_i^dag A_i - I)_{ab}|."""
    if op.dense:
        return float(np.max(np.abs(completeness_sum(op) - np.eye(op.dim_in))))
    return float(np.max(np.abs(_rank_one_completeness(op) - 1.0)))


@dataclass(frozen=True)
class ChoiReport:
    matrix: np.ndarray
    min_eigenvalue: float

    @property
    def accepted(self) -> bool:
        return self.min_eigenvalue >= -PSD_TOL


def choi_of_map(channel: Callable[[np.ndarray], np.ndarray], dim_in: int) -> ChoiReport:
    """Choi matrix sum_ij E_ij x channel(E_ij) of an arbitrary linear map."""
    if dim_in > CHOI_MAX_DIM:
        raise CapabilityError(
            f"Choi matrix for input dimension {dim_in} exceeds the limit {CHOI_MAX_DIM}; "
            "verify completeness only"
        )
    blocks = None
    for i in range(dim_in):
        for j in range(dim_in):
            e_ij = np.zeros((dim_in, dim_in), dtype=complex)
            e_ij[i, j] = 1.0
            term = np.kron(e_ij, channel(e_ij))
            blocks = term if blocks is None else blocks + term
    herm = (blocks + blocks.conj().T) / 2
    return ChoiReport(blocks, float(np.linalg.eigvalsh(herm)[0]))


def choi_matrix(op: QuantumOperation) -> ChoiReport:
    return choi_of_map(op.act, op.dim_in)
