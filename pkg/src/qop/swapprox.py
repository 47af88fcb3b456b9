"""Approximate continuous functions on the unit cube by polynomial operations.

Two synthesis routes are offered:

``paper``
    Expand the Bernstein polynomial B_k f into monomials, split positive and
    negative coefficients, divide by M >= 1 and write every negative term
    a x^b as |a| (1 - x^b). The resulting D_k polynomial P satisfies
    P = B_k f / M + sum|negative| / M, and the channel realises P, which is
    within epsilon of f / M.

``direct``
    Use the Bernstein samples f(weights / k) directly as D_k coefficients.
    They already lie in [0, 1], so M = 1.
"""
from __future__ import annotations

import logging
import os
from dataclasses import asdict, dataclass, field
from math import comb
from typing import Callable, Mapping

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from qop.dkbasis import (
    COEFF_TOL,
    DkPolynomial,
    MonomialPoly,
    assemble_dk,
    block_popcounts,
    complement_to_dk,
    eval_dk_grid,
    monomial_to_dk,
)
from qop.errors import CapabilityError, CoefficientRangeError, DomainError
from qop.krausfab import QuantumOperation, build_polynomial_operation

log = logging.getLogger(__name__)

DEFAULT_K_MAX = 8
DEFAULT_GRID = 101
ACCEPTANCE_GRID = 1001
MAX_ARITY = 4
MAX_M_DOUBLINGS = 200


@dataclass(frozen=True)
class TargetFunction:
    """A continuous map [0,1]^n -> declared_range.

    ``evaluator`` takes n broadcastable coordinate arrays and returns an
    array of values.
    """

    n: int
    evaluator: Callable = field(repr=False)
    declared_range: tuple[float, float] = (0.0, 1.0)
    name: str = "f"

    def __post_init__(self):
        if not 1 <= self.n <= MAX_ARITY:
            raise DomainError(f"arity must be between 1 and {MAX_ARITY}, got {self.n}")
        lo, hi = self.declared_range
        if not 0.0 <= lo <= hi <= 1.0:
            raise DomainError(f"declared range {self.declared_range} is not a subinterval of [0, 1]")

    def __call__(self, *coords):
        return np.asarray(self.evaluator(*(np.asarray(c, dtype=float) for c in coords)), dtype=float)

    def on_lattice(self, resolution: int) -> np.ndarray:
        mesh = np.meshgrid(*([lattice_axis(resolution)] * self.n), indexing="ij")
        vals = np.broadcast_to(self(*mesh), mesh[0].shape)
        self.check_range(vals)
        return vals

    def check_range(self, vals) -> None:
        vals = np.asarray(vals)
        lo, hi = self.declared_range
        if not np.all(np.isfinite(vals)):
            raise DomainError(f"{self.name} produced non-finite values")
        if vals.min() < lo - 1e-12 or vals.max() > hi + 1e-12:
            raise DomainError(
                f"{self.name} takes values in [{vals.min():.6g}, {vals.max():.6g}], outside {self.declared_range}"
            )

    def shrunk(self, scale: float = 0.98, offset: float = 0.01) -> "TargetFunction":
        """scale * f + offset, pulling the range into the open unit interval."""
        lo, hi = self.declared_range
        f = self.evaluator
        return TargetFunction(
            self.n,
            lambda *x: scale * np.asarray(f(*x), dtype=float) + offset,
            (scale * lo + offset, scale * hi + offset),
            f"{self.name}_shrunk",
        )


def negate(f: TargetFunction) -> TargetFunction:
    """1 - f."""
    lo, hi = f.declared_range
    g = f.evaluator
    return TargetFunction(f.n, lambda *x: 1.0 - np.asarray(g(*x), dtype=float), (1.0 - hi, 1.0 - lo), f"not_{f.name}")


def negate_inputs(f: TargetFunction) -> TargetFunction:
    """f(1 - x_1, ..., 1 - x_n)."""
    g = f.evaluator
    return TargetFunction(f.n, lambda *x: g(*(1.0 - np.asarray(c, dtype=float) for c in x)),
                          f.declared_range, f"{f.name}_of_not")


def _luka_tnorm() -> TargetFunction:
    # de Morgan dual of the conorm: max(0, x + y - 1)
    f = negate(negate_inputs(BUILTINS["luka_sum"]))
    return TargetFunction(2, f.evaluator, (0.0, 1.0), "luka_tnorm")


BUILTINS: dict[str, TargetFunction] = {
    "luka_sum": TargetFunction(2, lambda x, y: np.minimum(1.0, x + y), name="luka_sum"),
    "product": TargetFunction(2, lambda x, y: x * y, name="product"),
    "min": TargetFunction(2, np.minimum, name="min"),
    "max": TargetFunction(2, np.maximum, name="max"),
    "probabilistic_sum": TargetFunction(2, lambda x, y: x + y - x * y, name="probabilistic_sum"),
    "identity": TargetFunction(1, lambda x: x, name="identity"),
    "negation": TargetFunction(1, lambda x: 1.0 - x, name="negation"),
}
BUILTINS["luka_tnorm"] = _luka_tnorm()


def builtin(name: str) -> TargetFunction:
    try:
        return BUILTINS[name]
    except KeyError:
        raise DomainError(f"unknown builtin {name!r}; available: {', '.join(sorted(BUILTINS))}") from None


def sampled_function(n: int, k_grid: int, values, name: str = "samples") -> TargetFunction:
    """Multilinear interpolation of samples on the lattice {0, 1/k_grid, ..., 1}^n.

    ``values`` is either nested to depth n or flat in row-major order (first
    coordinate varies slowest).
    """
    if k_grid < 1:
        raise DomainError(f"k_grid must be >= 1, got {k_grid}")
    arr = np.asarray(values, dtype=float)
    shape = (k_grid + 1,) * n
    if arr.size != np.prod(shape):
        raise DomainError(f"expected {np.prod(shape)} samples for n={n}, k_grid={k_grid}, got {arr.size}")
    arr = arr.reshape(shape)
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise DomainError("samples must be finite values in [0, 1]")
    axis = np.linspace(0.0, 1.0, k_grid + 1)
    interp = RegularGridInterpolator([axis] * n, arr, method="linear")

    def evaluator(*coords):
        b = np.broadcast_arrays(*coords)
        pts = np.stack([np.clip(c, 0.0, 1.0).ravel() for c in b], axis=-1)
        return interp(pts).reshape(b[0].shape)

    return TargetFunction(n, evaluator, (float(arr.min()), float(arr.max())), name)


def lattice_axis(resolution: int) -> np.ndarray:
    if resolution < 2:
        raise DomainError(f"grid resolution must be >= 2, got {resolution}")
    return np.linspace(0.0, 1.0, resolution)


def values_on_lattice(obj, n: int, resolution: int) -> np.ndarray:
    """Evaluate a TargetFunction, DkPolynomial, MonomialPoly or plain callable
    on the uniform lattice with ``resolution`` points per axis."""
    axis = lattice_axis(resolution)
    if isinstance(obj, DkPolynomial):
        if obj.n != n:
            raise DomainError(f"polynomial arity {obj.n} differs from n={n}")
        return eval_dk_grid(obj, axis)
    if isinstance(obj, MonomialPoly):
        return _monomial_on_lattice(obj, axis)
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    return np.broadcast_to(np.asarray(obj(*mesh), dtype=float), mesh[0].shape)


def _monomial_on_lattice(p: MonomialPoly, axis: np.ndarray) -> np.ndarray:
    out = np.zeros((axis.size,) * p.n)
    for alpha, c in p.terms.items():
        term = np.array(c)
        for a in alpha:
            term = np.multiply.outer(term, axis**a)
        out += term
    return out


def grid_extremum(f, g, n: int, resolution: int, signed: bool = False) -> tuple[float, tuple[float, ...]]:
    """Largest |f - g| (or f - g when ``signed``) on the lattice and where it
    occurs; ties resolve to the first point in row-major order."""
    diff = values_on_lattice(f, n, resolution) - values_on_lattice(g, n, resolution)
    if not signed:
        diff = np.abs(diff)
    flat = int(np.argmax(diff))
    idx = np.unravel_index(flat, diff.shape)
    axis = lattice_axis(resolution)
    return float(diff[idx]), tuple(float(axis[i]) for i in idx)


def sup_error_grid(f, g, n: int, resolution: int, signed: bool = False) -> float:
    return grid_extremum(f, g, n, resolution, signed)[0]


def _bernstein_to_monomial(k: int) -> np.ndarray:
    """T[b, m]: coefficient of x^m in C(k, b) x^b (1 - x)^(k - b)."""
    t = np.zeros((k + 1, k + 1))
    for b in range(k + 1):
        for m in range(b, k + 1):
            t[b, m] = comb(k, b) * comb(k - b, m - b) * (-1) ** (m - b)
    return t


def bernstein_samples(f: TargetFunction, k: int) -> np.ndarray:
    """f(beta / k) on the (k+1)^n lattice."""
    if k < 1:
        raise DomainError(f"Bernstein degree must be >= 1, got {k}")
    return f.on_lattice(k + 1)


def bernstein_poly(f: TargetFunction, k: int) -> MonomialPoly:
    """Tensor-product Bernstein polynomial B_k f in monomial form."""
    coeffs = bernstein_samples(f, k)
    t = _bernstein_to_monomial(k)
    for _ in range(f.n):
        # contract the leading sample axis, append the monomial-degree axis
        coeffs = np.tensordot(coeffs, t, axes=([0], [0]))
    terms = {tuple(int(i) for i in idx): float(c) for idx, c in np.ndenumerate(coeffs) if c != 0.0}
    return MonomialPoly(f.n, terms)


def bernstein_direct_dk(f: TargetFunction, k: int) -> DkPolynomial:
    """D_k polynomial with a_y = f(w_1/k, ..., w_n/k), w_i the ones in block i.

    Its value is exactly B_k f, since each Bernstein basis function is the sum
    of the C(k, w) elements of weight w.
    """
    samples = bernstein_samples(f, k)
    lo, hi = samples.min(), samples.max()
    if lo < -COEFF_TOL or hi > 1.0 + COEFF_TOL:
        raise DomainError(f"{f.name} leaves [0, 1] on the Bernstein lattice (range [{lo:.6g}, {hi:.6g}])")
    pop = block_popcounts(k)
    coeffs = samples[np.ix_(*([pop] * f.n))]
    return DkPolynomial(f.n, k, coeffs.ravel())


@dataclass(frozen=True)
class SignedBundle:
    """P = sum_pos c x^alpha + sum_comp c (1 - x^beta), all c >= 0.

    ``positive`` and ``complement`` already include the 1/M factor;
    ``negative_sum`` is sum |a_beta| before rescaling.
    """

    n: int
    positive: Mapping[tuple[int, ...], float]
    complement: Mapping[tuple[int, ...], float]
    M: float
    negative_sum: float

    @property
    def max_degree(self) -> int:
        alphas = list(self.positive) + list(self.complement)
        return max((max(a) for a in alphas), default=0)

    def vectors(self, k: int) -> list[np.ndarray]:
        vecs = [c * monomial_to_dk(a, k) for a, c in self.positive.items()]
        vecs += [c * complement_to_dk(b, k) for b, c in self.complement.items()]
        return vecs


def _bundle(p0: MonomialPoly, M: float) -> SignedBundle:
    neg = p0.negative()
    return SignedBundle(
        p0.n,
        {a: c / M for a, c in p0.positive().items()},
        {b: -c / M for b, c in neg.items()},
        M,
        float(sum(-c for c in neg.values())),
    )


def rescale_with_M(p0: MonomialPoly, epsilon: float, k: int | None = None) -> tuple[SignedBundle, float]:
    """Pick M >= 1 with sum|negative| / M <= epsilon / 2 and split signs.

    M starts at max(1, 2 sum|negative| / epsilon) and doubles until every D_k
    coefficient of the bundle lies in [0, 1] (k defaults to the largest
    single-variable exponent of ``p0``).
    """
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    neg_sum = float(sum(-c for c in p0.negative().values()))
    M = max(1.0, 2.0 * neg_sum / epsilon)
    k = max(1, p0.max_degree) if k is None else k
    for _ in range(MAX_M_DOUBLINGS):
        bundle = _bundle(p0, M)
        try:
            assemble_dk(p0.n, k, *bundle.vectors(k))
            return bundle, M
        except CoefficientRangeError:
            M *= 2.0
    raise CapabilityError(f"no admissible M found after {MAX_M_DOUBLINGS} doublings")


def bundle_to_dk(bundle: SignedBundle, k: int) -> DkPolynomial:
    if any(c < 0 for c in list(bundle.positive.values()) + list(bundle.complement.values())):
        raise DomainError("bundle coefficients must be non-negative")
    return assemble_dk(bundle.n, k, *bundle.vectors(k))


@dataclass(frozen=True)
class ApproxReport:
    name: str
    mode: str
    k: int
    M: float
    epsilon: float
    sup_error: float
    kraus_count: int
    grid: int
    bernstein_error: float
    negative_sum: float = 0.0

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Synthesis:
    op: QuantumOperation
    poly: DkPolynomial
    report: ApproxReport

    def __iter__(self):
        return iter((self.op, self.poly, self.report))


def default_grid() -> int:
    env = os.environ.get("QOP_GRID_RES")
    return int(env) if env else DEFAULT_GRID


def _try_degree(f: TargetFunction, k: int, epsilon: float, mode: str, grid: int, strict: bool):
    """Return (poly, M, bernstein_error, sup_error, neg_sum, accepted)."""
    target = f.on_lattice(grid)
    if mode == "direct":
        poly = bernstein_direct_dk(f, k)
        err = float(np.max(np.abs(eval_dk_grid(poly, lattice_axis(grid)) - target)))
        return poly, 1.0, err, err, 0.0, err <= epsilon
    p0 = bernstein_poly(f, k)
    bern_err = float(np.max(np.abs(_monomial_on_lattice(p0, lattice_axis(grid)) - target)))
    bundle, M = rescale_with_M(p0, epsilon, k)
    poly = bundle_to_dk(bundle, k)
    sup_err = float(np.max(np.abs(eval_dk_grid(poly, lattice_axis(grid)) - target / M)))
    # |P - f/M| <= neg_sum/M + |B_k f - f|/M; the first term is <= eps/2 by choice of M
    budget = bern_err if strict else bern_err / M
    ok = budget <= epsilon / 2 and sup_err <= epsilon
    return poly, M, bern_err, sup_err, bundle.negative_sum, ok


def synthesize(
    f: TargetFunction,
    epsilon: float,
    mode: str = "paper",
    k_max: int = DEFAULT_K_MAX,
    grid: int | None = None,
    k: int | None = None,
    strict: bool = False,
) -> Synthesis:
    """Raise the Bernstein degree until the certified grid error is <= epsilon.

    In paper mode a degree is accepted once |B_k f - f| / M <= epsilon / 2,
    which together with sum|negative| / M <= epsilon / 2 bounds |P - f/M| by
    epsilon; ``strict=True`` instead demands |B_k f - f| <= epsilon / 2
    regardless of M. Pass ``k`` to try one degree only.
    """
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    if mode not in ("paper", "direct"):
        raise DomainError(f"mode must be 'paper' or 'direct', got {mode!r}")
    grid = default_grid() if grid is None else grid
    degrees = [k] if k is not None else range(1, k_max + 1)
    best = None
    for deg in degrees:
        poly, M, bern_err, sup_err, neg_sum, ok = _try_degree(f, deg, epsilon, mode, grid, strict)
        log.debug("%s k=%d M=%.6g bernstein=%.3g certified=%.3g", f.name, deg, M, bern_err, sup_err)
        if best is None or sup_err < best[1]:
            best = (deg, sup_err)
        if ok:
            op = build_polynomial_operation(poly, name=f.name)
            report = ApproxReport(f.name, mode, deg, M, epsilon, sup_err, op.kraus_count, grid, bern_err, neg_sum)
            return Synthesis(op, poly, report)
    raise CapabilityError(
        f"{f.name}: no degree up to {degrees[-1]} reaches epsilon={epsilon} in {mode} mode "
        f"(best k={best[0]}, error {best[1]:.4g})",
        best=best,
    )
