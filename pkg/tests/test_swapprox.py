import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qop.densmat import copies_state, probability, random_qubit
from qop.dkbasis import MonomialPoly, eval_dk, eval_dk_points
from qop.errors import CapabilityError, DomainError
from qop.krausfab import apply, apply_closed_form, check_completeness, choi_matrix
from qop.swapprox import (
    BUILTINS,
    TargetFunction,
    bernstein_direct_dk,
    bernstein_poly,
    builtin,
    bundle_to_dk,
    grid_extremum,
    negate,
    rescale_with_M,
    sampled_function,
    sup_error_grid,
    synthesize,
)
from qop.gatelib import luka_value

LUKA = builtin("luka_sum")


def bernstein_oracle(f, k, x):
    total = 0.0
    for beta in itertools.product(range(k + 1), repeat=f.n):
        w = 1.0
        for b, xi in zip(beta, x):
            w *= comb(k, b) * xi**b * (1 - xi) ** (k - b)
        total += float(f(*(np.array(b / k) for b in beta))) * w
    return total


def test_bernstein_reproduces_bilinear():
    assert bernstein_poly(builtin("product"), 1).terms == {(1, 1): 1.0}


def test_bernstein_of_square():
    p = bernstein_poly(TargetFunction(1, lambda x: x**2), 2)
    assert p.terms == {(1,): 0.5, (2,): 0.5}


def test_bernstein_matches_oracle(rng):
    for name in ("luka_sum", "min", "probabilistic_sum"):
        f = builtin(name)
        for k in (1, 2, 3, 5):
            p = bernstein_poly(f, k)
            assert p.max_degree <= k
            for x in rng.random((5, 2)):
                assert abs(p(x) - bernstein_oracle(f, k, x)) <= 1e-12


def test_bernstein_luka_degree_two_error():
    err = sup_error_grid(bernstein_poly(LUKA, 2), LUKA, 2, 1001)
    assert err == pytest.approx(0.1875, abs=1e-12)
    assert err <= 0.26


def test_bernstein_error_decreases_for_luka():
    errs = [sup_error_grid(bernstein_poly(LUKA, k), LUKA, 2, 201) for k in range(1, 7)]
    assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))


def test_direct_dk_examples():
    assert np.array_equal(bernstein_direct_dk(builtin("identity"), 1).coeffs, [0.0, 1.0])
    assert np.array_equal(bernstein_direct_dk(builtin("product"), 1).coeffs, [0, 0, 0, 1])
    p = bernstein_direct_dk(LUKA, 2)
    assert p.coeffs.size == 16 and set(p.coeffs) <= {0.0, 0.5, 1.0}


def test_direct_dk_equals_bernstein(rng):
    for name in ("luka_sum", "max", "probabilistic_sum"):
        f = builtin(name)
        for k in (1, 2, 3):
            p = bernstein_direct_dk(f, k)
            for x in rng.random((10, 2)):
                assert abs(eval_dk(p, x) - bernstein_oracle(f, k, x)) <= 1e-12


def test_direct_dk_rejects_out_of_range():
    f = TargetFunction(1, lambda x: 2 * x, declared_range=(0.0, 1.0))
    with pytest.raises(DomainError):
        bernstein_direct_dk(f, 1)


def test_rescale_nothing_to_shift():
    p0 = MonomialPoly(2, {(1, 0): 0.3, (0, 1): 0.4})
    bundle, M = rescale_with_M(p0, 0.01)
    assert M == 1.0
    assert bundle.positive == p0.terms and not bundle.complement


def test_rescale_x_minus_x_squared():
    bundle, M = rescale_with_M(MonomialPoly(1, {(1,): 1.0, (2,): -1.0}), 0.5)
    assert M == 4.0
    assert bundle.positive == {(1,): 0.25} and bundle.complement == {(2,): 0.25}
    p = bundle_to_dk(bundle, 2)
    for x in np.linspace(0, 1, 11):
        assert eval_dk(p, [x]) == pytest.approx((x - x**2) / 4 + 0.25, abs=1e-12)


def test_rescale_luka_inequality():
    p0 = bernstein_poly(LUKA, 2)
    bundle, M = rescale_with_M(p0, 0.1)
    neg = sum(-c for c in p0.terms.values() if c < 0)
    assert bundle.negative_sum == pytest.approx(neg)
    assert neg / M <= 0.1 / 2
    assert M >= 1


def test_rescale_doubles_until_admissible():
    # positive mass 1.5 alone forces coefficients above 1 at M = 1
    p0 = MonomialPoly(1, {(0,): 0.9, (1,): 0.6})
    bundle, M = rescale_with_M(p0, 1.0)
    assert M == 2.0
    assert bundle_to_dk(bundle, 1).coeffs.max() <= 1.0


def test_rescale_rejects_bad_epsilon():
    with pytest.raises(DomainError):
        rescale_with_M(MonomialPoly(1, {(1,): 1.0}), 0.0)


def test_bundle_to_dk_examples():
    one = rescale_with_M(MonomialPoly(1, {(1,): 1.0}), 0.1)[0]
    assert np.array_equal(bundle_to_dk(one, 1).coeffs, [0.0, 1.0])
    comp = rescale_with_M(MonomialPoly(1, {(1,): -1.0}), 2.0)[0]
    assert comp.M == 1.0
    assert np.array_equal(bundle_to_dk(comp, 1).coeffs, [1.0, 0.0])
    # 1 - x shifted by its negative mass would need a coefficient of 2, so M doubles
    both = rescale_with_M(MonomialPoly(1, {(0,): 1.0, (1,): -1.0}), 2.0)[0]
    assert both.M == 2.0
    assert np.allclose(bundle_to_dk(both, 1).coeffs, [1.0, 0.5])
    mixed = rescale_with_M(MonomialPoly(1, {(0,): 0.6}), 0.1)[0]
    p = bundle_to_dk(mixed, 1)
    assert np.allclose(p.coeffs, [0.6, 0.6])
    assert eval_dk(p, [0.37]) == pytest.approx(0.6)


def test_sup_error_examples():
    ident = builtin("identity")
    assert sup_error_grid(ident, ident, 1, 11) == 0.0
    square = TargetFunction(1, lambda x: x**2)
    assert sup_error_grid(ident, square, 1, 1001) == pytest.approx(0.25, abs=1e-4)
    value, where = grid_extremum(LUKA, luka_value, 2, 1001, signed=True)
    assert value == pytest.approx(1 / 12, abs=1e-4)
    assert where[0] + where[1] == pytest.approx(1.0)
    assert luka_value(0.5, 0.5) == pytest.approx(11 / 12)


def test_sup_error_resolution():
    with pytest.raises(DomainError):
        sup_error_grid(LUKA, LUKA, 2, 1)


def test_synthesize_product_direct_is_exact():
    op, poly, report = synthesize(builtin("product"), 0.01, mode="direct")
    assert (report.k, report.M) == (1, 1.0)
    assert report.sup_error <= 1e-12
    assert np.array_equal(poly.coeffs, [0, 0, 0, 1])


def test_synthesize_identity_paper_mode():
    op, poly, report = synthesize(builtin("identity"), 0.3, mode="paper")
    assert (report.k, report.M) == (1, 1.0)
    assert {(k.row, k.col) for k in op.kraus} == {(0, 0), (1, 1)}


def test_synthesize_luka_direct_needs_more_than_k_max():
    for f in (LUKA, LUKA.shrunk()):
        with pytest.raises(CapabilityError) as info:
            synthesize(f, 0.05, mode="direct")
        k, err = info.value.best
        assert k == 8 and 0.09 < err < 0.1


def test_synthesize_luka_direct_coarse_epsilon():
    syn = synthesize(LUKA, 0.2, mode="direct")
    assert syn.report.k == 2 and syn.report.sup_error == pytest.approx(0.1875)


def test_synthesize_strict_rule_is_literal():
    with pytest.raises(CapabilityError):
        synthesize(LUKA.shrunk(), 0.05, mode="paper", strict=True)
    syn = synthesize(builtin("product"), 0.05, mode="paper", strict=True)
    assert syn.report.k == 1


def test_synthesize_fixed_degree():
    syn = synthesize(LUKA, 0.5, mode="direct", k=3)
    assert syn.report.k == 3


def test_synthesize_rejects_bad_input():
    with pytest.raises(DomainError):
        synthesize(LUKA, -1.0)
    with pytest.raises(DomainError):
        synthesize(LUKA, 0.1, mode="other")


def test_direct_mode_needs_no_rescaling():
    for f in BUILTINS.values():
        for k in (1, 2, 3):
            p = bernstein_direct_dk(f, k)
            assert p.coeffs.min() >= 0 and p.coeffs.max() <= 1


@pytest.mark.parametrize("name", sorted(BUILTINS))
@pytest.mark.parametrize("eps", [0.1, 0.05])
def test_paper_mode_end_to_end(name, eps, rng):
    f = builtin(name).shrunk()
    op, poly, report = synthesize(f, eps, mode="paper")
    assert report.M >= 1
    assert report.negative_sum / report.M <= eps / 2
    assert report.sup_error <= eps
    assert check_completeness(op) <= 1e-12
    for _ in range(20):
        states = [random_qubit(rng) for _ in range(f.n)]
        probs = [probability(s) for s in states]
        out = apply(op, copies_state(states, report.k))
        target = float(f(*probs)) / report.M
        assert abs(probability(out) - target) <= eps


def test_paper_mode_choi(rng):
    for name in ("luka_sum", "min", "negation"):
        op = synthesize(builtin(name).shrunk(), 0.1, mode="paper").op
        if op.dim_in <= 16:
            assert choi_matrix(op).accepted


def test_negate_and_shrink():
    f = negate(builtin("identity"))
    assert float(f(np.array(0.2))) == pytest.approx(0.8)
    g = LUKA.shrunk()
    assert g.declared_range == pytest.approx((0.01, 0.99))
    assert float(g(np.array(1.0), np.array(1.0))) == pytest.approx(0.99)
    assert float(builtin("luka_tnorm")(np.array(0.7), np.array(0.6))) == pytest.approx(0.3)


def test_unknown_builtin():
    with pytest.raises(DomainError, match="available"):
        builtin("nosuch")


def test_sampled_function_interpolates():
    f = sampled_function(2, 1, [[0, 0], [0, 1]])
    assert float(f(np.array(0.3), np.array(0.5))) == pytest.approx(0.15)
    syn = synthesize(f, 0.01, mode="direct")
    assert syn.report.k == 1 and syn.report.sup_error <= 1e-12


def test_sampled_function_validation():
    with pytest.raises(DomainError):
        sampled_function(1, 2, [0, 0.5])
    with pytest.raises(DomainError):
        sampled_function(1, 1, [0, 1.5])


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0, 1), min_size=9, max_size=9), st.integers(1, 4))
def test_direct_coefficients_are_samples(values, k):
    f = sampled_function(2, 2, values)
    p = bernstein_direct_dk(f, k)
    assert 0.0 <= p.coeffs.min() and p.coeffs.max() <= 1.0
    pts = np.array([[0.25, 0.75], [0.5, 0.1]])
    ref = [bernstein_oracle(f, k, x) for x in pts]
    assert np.allclose(eval_dk_points(p, pts), ref, atol=1e-12)
