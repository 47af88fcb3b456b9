"""The D_k generator system and coefficient vectors over it.

An element of D_k(x_1, ..., x_n) is addressed by a bitstring of n blocks of
k slots. Slot value 1 contributes a factor x_i, slot value 0 a factor
(1 - x_i). Reading the whole bitstring as a binary number (first slot most
significant) gives the diagonal position of that element in
(x^k X_1) x ... x (x^k X_n), which is the position polynomial operations
address.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb
from typing import Iterable, Mapping, Sequence

import numpy as np

from qop.errors import CoefficientRangeError, DegreeError, DomainError, StructuralError

COEFF_TOL = 1e-12
MAX_SLOTS = 24

DK_FORMAT = (
    "qop-dk/1: coeffs[j] multiplies the D_k element whose n*k-bit binary "
    "expansion of j (most significant first) lists the slots; block i is "
    "slots i*k..i*k+k-1; bit 1 = factor x_i, bit 0 = factor (1 - x_i)"
)


def _check_nk(n: int, k: int) -> None:
    if n < 1 or k < 1:
        raise DomainError(f"need n >= 1 and k >= 1, got n={n}, k={k}")
    if n * k > MAX_SLOTS:
        raise DomainError(f"n*k = {n * k} exceeds the supported {MAX_SLOTS} slots")


def _check_point(x, n: int) -> np.ndarray:
    pt = np.atleast_1d(np.asarray(x, dtype=float))
    if pt.shape[-1] != n:
        raise StructuralError(f"expected points with {n} coordinates, got shape {pt.shape}")
    if np.any(~np.isfinite(pt)) or np.any(pt < 0.0) or np.any(pt > 1.0):
        raise DomainError(f"point {x} lies outside the unit cube")
    return pt


@dataclass(frozen=True)
class DkIndex:
    """Bitstring address of one D_k element."""

    n: int
    k: int
    bits: str

    def __post_init__(self):
        _check_nk(self.n, self.k)
        if len(self.bits) != self.n * self.k or set(self.bits) - {"0", "1"}:
            raise StructuralError(f"bits {self.bits!r} is not a {self.n * self.k}-bit string")

    @classmethod
    def from_position(cls, j: int, n: int, k: int) -> "DkIndex":
        if not 0 <= j < 2 ** (n * k):
            raise StructuralError(f"position {j} out of range for n={n}, k={k}")
        return cls(n, k, format(j, f"0{n * k}b"))

    @property
    def position(self) -> int:
        return int(self.bits, 2)

    @property
    def blocks(self) -> list[str]:
        return [self.bits[i * self.k:(i + 1) * self.k] for i in range(self.n)]

    @property
    def weights(self) -> tuple[int, ...]:
        """Number of x_i factors in each block."""
        return tuple(b.count("1") for b in self.blocks)

    def pretty(self) -> str:
        return "".join(f"({b})" for b in self.blocks)


def bits_of(j: int, n: int, k: int) -> str:
    return format(j, f"0{n * k}b")


def dk_eval_element(idx: DkIndex, x) -> float:
    """Value of the D_k element ``idx`` at ``x``."""
    pt = _check_point(x, idx.n)
    val = 1.0
    for i, block in enumerate(idx.blocks):
        ones = block.count("1")
        val *= pt[i] ** ones * (1.0 - pt[i]) ** (idx.k - ones)
    return float(val)


def dk_element_values(n: int, k: int, x) -> np.ndarray:
    """Values of all 2^(nk) elements at ``x``, ordered by diagonal position."""
    _check_nk(n, k)
    pt = _check_point(x, n)
    vals = np.ones(1)
    for xi in pt:
        slot = np.array([1.0 - xi, xi])
        for _ in range(k):
            vals = np.kron(vals, slot)
    return vals


def block_popcounts(k: int) -> np.ndarray:
    """Popcount of every k-bit block value 0 .. 2^k - 1."""
    return np.array([bin(b).count("1") for b in range(2**k)])


@dataclass(frozen=True, eq=False)
class DkPolynomial:
    """P(x) = sum_y a_y y with every a_y in [0, 1]."""

    n: int
    k: int
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        _check_nk(self.n, self.k)
        arr = np.array(self.coeffs, dtype=float, copy=True).ravel()
        if arr.size != 2 ** (self.n * self.k):
            raise StructuralError(
                f"expected {2 ** (self.n * self.k)} coefficients for n={self.n}, k={self.k}, got {arr.size}"
            )
        arr = _clamp_coeffs(arr, self.n, self.k)
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @property
    def slots(self) -> int:
        return self.n * self.k

    @property
    def dim(self) -> int:
        return 2**self.slots

    def __eq__(self, other):
        if not isinstance(other, DkPolynomial):
            return NotImplemented
        return (self.n, self.k) == (other.n, other.k) and bool(np.array_equal(self.coeffs, other.coeffs))

    def __hash__(self):
        return hash((self.n, self.k, self.coeffs.tobytes()))

    def __call__(self, x) -> float:
        return eval_dk(self, x)

    def to_json(self) -> dict:
        return {"format": DK_FORMAT, "n": self.n, "k": self.k, "coeffs": [float(c) for c in self.coeffs]}

    @classmethod
    def from_json(cls, obj: Mapping) -> "DkPolynomial":
        try:
            return cls(int(obj["n"]), int(obj["k"]), np.asarray(obj["coeffs"], dtype=float))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, DomainError):
                raise
            raise StructuralError(f"malformed DkPolynomial JSON: {exc}") from exc


def _clamp_coeffs(arr: np.ndarray, n: int, k: int) -> np.ndarray:
    if not np.all(np.isfinite(arr)):
        raise DomainError("D_k coefficients must be finite")
    bad = np.flatnonzero((arr < -COEFF_TOL) | (arr > 1.0 + COEFF_TOL))
    if bad.size:
        j = int(bad[np.argmax(np.abs(arr[bad] - 0.5))])
        bits = DkIndex.from_position(j, n, k).pretty()
        raise CoefficientRangeError(
            f"coefficient {arr[j]:.6g} at bitstring {bits} lies outside [0, 1] "
            f"({bad.size} offending entries); rescale with a larger M or raise k",
            bits=bits,
            value=float(arr[j]),
        )
    return np.clip(arr, 0.0, 1.0)


MultiIndex = tuple[int, ...]


def order(alpha: Sequence[int]) -> int:
    return int(sum(alpha))


def _check_alpha(alpha: Sequence[int], k: int) -> tuple[int, ...]:
    alpha = tuple(int(a) for a in alpha)
    if any(a < 0 for a in alpha):
        raise DomainError(f"multi-index {alpha} has negative entries")
    _check_nk(len(alpha), k)
    if any(a > k for a in alpha):
        raise DegreeError(f"multi-index {alpha} has an exponent above k={k}; raise k")
    return alpha


def _block_prefix_mask(k: int, ones: int, zeros: int) -> np.ndarray:
    """Indicator over k-bit blocks: first ``ones`` slots 1, next ``zeros`` slots 0."""
    mask = np.zeros(2**k)
    for b in range(2**k):
        s = format(b, f"0{k}b")
        if s[:ones] == "1" * ones and s[ones:ones + zeros] == "0" * zeros:
            mask[b] = 1.0
    return mask


def _block_symmetric_weights(k: int, ones: int, zeros: int) -> np.ndarray:
    """Spread x^ones (1-x)^zeros evenly across all equivalent block positions."""
    pad = k - ones - zeros
    pop = block_popcounts(k)
    w = np.zeros(2**k)
    for b in range(2**k):
        m = pop[b] - ones
        if 0 <= m <= pad:
            w[b] = comb(pad, m) / comb(k, pop[b])
    return w


def _kron_blocks(blocks: Iterable[np.ndarray]) -> np.ndarray:
    out = np.ones(1)
    for b in blocks:
        out = np.kron(out, b)
    return out


def monomial_to_dk(alpha: Sequence[int], k: int) -> np.ndarray:
    """0/1 vector delta with sum_y delta_y y = x^alpha.

    Picks the bitstrings whose first alpha_i slots in block i are all 1.
    """
    alpha = _check_alpha(alpha, k)
    return _kron_blocks(_block_prefix_mask(k, a, 0) for a in alpha)


def complement_to_dk(alpha: Sequence[int], k: int) -> np.ndarray:
    """0/1 vector gamma = 1 - delta, so sum_y gamma_y y = 1 - x^alpha."""
    return 1.0 - monomial_to_dk(alpha, k)


def product_term_to_dk(
    factors: Sequence[tuple[int, int]], c: float, k: int, spread: str = "prefix"
) -> np.ndarray:
    """Weighted vector for c * prod_i (1 - x_i)^a_i x_i^b_i.

    ``factors`` holds one (a_i, b_i) pair per variable. With
    ``spread="prefix"`` each block gets the b_i ones first, then the a_i
    zeros, and the remaining slots are left free. ``spread="symmetric"``
    divides the weight evenly over every block position carrying the same
    number of ones, which minimises the largest coefficient.
    """
    if c < 0:
        raise DomainError(f"term coefficient must be non-negative, got {c}; negative terms need M-rescaling")
    if spread not in ("prefix", "symmetric"):
        raise DomainError(f"unknown spread {spread!r}")
    pairs = [(int(a), int(b)) for a, b in factors]
    _check_nk(len(pairs), k)
    for a, b in pairs:
        if a < 0 or b < 0:
            raise DomainError(f"negative exponent in {pairs}")
        if a + b > k:
            raise DegreeError(f"factor exponents {(a, b)} exceed k={k}")
    block = _block_prefix_mask if spread == "prefix" else _block_symmetric_weights
    return c * _kron_blocks(block(k, b, a) for a, b in pairs)


def assemble_dk(n: int, k: int, *vectors: np.ndarray) -> DkPolynomial:
    """Sum weighted coefficient vectors into a validated DkPolynomial."""
    _check_nk(n, k)
    total = np.zeros(2 ** (n * k))
    for v in vectors:
        v = np.asarray(v, dtype=float)
        if v.shape != total.shape:
            raise StructuralError(f"vector of length {v.size} does not match n={n}, k={k}")
        total = total + v
    return DkPolynomial(n, k, total)


def _contract(coeffs: np.ndarray, n: int, k: int, block_mats: Sequence[np.ndarray]) -> np.ndarray:
    """Contract coefficient tensor with per-variable block value matrices.

    ``block_mats[i]`` has shape (m_i, 2^k). Returns an array of shape
    (m_1, ..., m_n).
    """
    t = coeffs.reshape((2**k,) * n)
    for i, mat in enumerate(block_mats):
        # contract axis i (now first remaining coefficient axis) and append point axis
        t = np.tensordot(t, mat, axes=([0], [1]))
    return t


def block_values(k: int, xs) -> np.ndarray:
    """Matrix (len(xs), 2^k) of k-slot block element values."""
    xs = np.asarray(xs, dtype=float).ravel()
    pop = block_popcounts(k)
    return xs[:, None] ** pop[None, :] * (1.0 - xs[:, None]) ** (k - pop)[None, :]


def eval_dk(p: DkPolynomial, x) -> float:
    """P(x) = sum_y a_y y(x)."""
    pt = _check_point(x, p.n)
    mats = [block_values(p.k, [xi]) for xi in pt]
    return float(_contract(p.coeffs, p.n, p.k, mats).ravel()[0])


def eval_dk_points(p: DkPolynomial, points) -> np.ndarray:
    """Evaluate at each row of ``points`` (shape (m, n))."""
    pts = _check_point(np.atleast_2d(points), p.n)
    vals = np.ones((pts.shape[0], 1))
    for i in range(p.n):
        vals = np.einsum("pa,pb->pab", vals, block_values(p.k, pts[:, i])).reshape(pts.shape[0], -1)
    return vals @ p.coeffs


def eval_dk_grid(p: DkPolynomial, axis) -> np.ndarray:
    """Evaluate on the lattice axis^n; result has shape (len(axis),) * n."""
    axis = _check_point(np.asarray(axis, dtype=float)[:, None], 1).ravel()
    mat = block_values(p.k, axis)
    return _contract(p.coeffs, p.n, p.k, [mat] * p.n)


@dataclass(frozen=True)
class MonomialPoly:
    """Real polynomial sum_alpha a_alpha x^alpha with signed coefficients."""

    n: int
    terms: Mapping[tuple[int, ...], float]

    def __post_init__(self):
        clean = {}
        for alpha, c in self.terms.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.n or any(a < 0 for a in alpha):
                raise DomainError(f"bad multi-index {alpha} for n={self.n}")
            c = float(c)
            if not np.isfinite(c):
                raise DomainError(f"non-finite coefficient for {alpha}")
            if c != 0.0:
                clean[alpha] = clean.get(alpha, 0.0) + c
        object.__setattr__(self, "terms", {a: c for a, c in sorted(clean.items()) if c != 0.0})

    @property
    def max_degree(self) -> int:
        """Largest single-variable exponent."""
        return max((max(a) for a in self.terms), default=0)

    def positive(self) -> dict:
        return {a: c for a, c in self.terms.items() if c > 0}

    def negative(self) -> dict:
        return {a: c for a, c in self.terms.items() if c < 0}

    def __call__(self, x) -> float:
        pt = np.asarray(x, dtype=float)
        return float(sum(c * np.prod(pt ** np.array(a)) for a, c in self.terms.items()))

    def eval_points(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros(pts.shape[0])
        for a, c in self.terms.items():
            out += c * np.prod(pts ** np.array(a), axis=1)
        return out
