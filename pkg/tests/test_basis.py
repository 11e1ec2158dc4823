import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momfit.basis import (
    FULL,
    HOMOGENEOUS,
    BasisSizeError,
    Polynomial,
    QuadraticForm,
    enumerate_monomials,
    eval_polynomial,
    form_size,
    quadratic_form_to_coeffs,
)

from .conftest import naive_eval, random_poly


def test_univariate_enumeration():
    b = enumerate_monomials(1, 2)
    assert b.exponents == ((0,), (1,), (2,))


def test_constant_only_basis():
    b = enumerate_monomials(2, 0)
    assert b.exponents == ((0, 0),)


def test_trivariate_quartic_has_35_monomials():
    assert len(enumerate_monomials(3, 4)) == 35


def test_graded_lex_order():
    b = enumerate_monomials(2, 2)
    assert b.exponents == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))


@given(st.integers(1, 5), st.integers(0, 6))
def test_size_order_and_uniqueness(n, d):
    b = enumerate_monomials(n, d)
    assert len(b) == math.comb(n + d, d)
    assert len(set(b.exponents)) == len(b)
    assert b.exponents[0] == (0,) * n
    degs = [sum(g) for g in b.exponents]
    assert degs == sorted(degs)
    for k in range(d + 1):
        block = [g for g in b.exponents if sum(g) == k]
        assert block == sorted(block, reverse=True)


@given(st.integers(1, 4), st.integers(0, 5))
def test_lower_degree_basis_is_prefix(n, d):
    small, big = enumerate_monomials(n, d), enumerate_monomials(n, d + 1)
    assert big.exponents[: len(small)] == small.exponents


def test_invalid_arguments():
    with pytest.raises(ValueError):
        enumerate_monomials(0, 2)
    with pytest.raises(ValueError):
        enumerate_monomials(2, -1)
    with pytest.raises(BasisSizeError):
        enumerate_monomials(10**6, 10**6)


def test_eval_examples():
    b = enumerate_monomials(2, 2)
    const = Polynomial(b, np.eye(len(b))[0])
    assert eval_polynomial(const, [5.0, -3.0]) == 1.0
    xy = Polynomial.from_terms(2, 2, {(1, 1): 1.0})
    assert xy([2.0, 3.0]) == 6.0
    circle = Polynomial.from_terms(2, 2, {(0, 0): 1.0, (2, 0): -1.0, (0, 2): -1.0})
    assert abs(circle([0.6, 0.8])) < 1e-15


def test_eval_dimension_mismatch():
    p = Polynomial.from_terms(2, 1, {(1, 0): 1.0})
    with pytest.raises(ValueError):
        p([1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        p(np.zeros((4, 3)))


def test_eval_matches_naive(rng):
    for n, d in ((1, 5), (2, 4), (3, 4), (4, 2)):
        p = random_poly(rng, n, d)
        x = rng.uniform(-1.5, 1.5, (50, n))
        np.testing.assert_allclose(p(x), naive_eval(p, x), rtol=1e-12, atol=1e-12)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_eval_is_linear(seed, a, c):
    rng = np.random.default_rng(seed)
    p, q = random_poly(rng, 2, 3), random_poly(rng, 2, 3)
    x = rng.uniform(-1, 1, (10, 2))
    lhs = (a * p + c * q)(x)
    rhs = a * p(x) + c * q(x)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12 * (1 + np.abs(rhs).max()))


def test_identity_form_expansion():
    p = quadratic_form_to_coeffs(QuadraticForm(2, 1, np.eye(2), np.zeros(2), 1.0))
    expect = Polynomial.from_terms(2, 2, {(0, 0): 1.0, (2, 0): -1.0, (0, 2): -1.0})
    np.testing.assert_array_equal(p.coeffs, expect.coeffs)


def test_cross_term_doubling():
    p = quadratic_form_to_coeffs(QuadraticForm(2, 1, [[0.0, 1.0], [1.0, 0.0]], np.zeros(2), 0.0))
    expect = Polynomial.from_terms(2, 2, {(1, 1): -2.0})
    np.testing.assert_array_equal(p.coeffs, expect.coeffs)


@pytest.mark.parametrize("variant", [HOMOGENEOUS, FULL])
def test_quartic_form_matches_direct_evaluation(rng, variant):
    m = form_size(2, 2, variant)
    A = rng.standard_normal((m, m))
    q = QuadraticForm(2, 2, A + A.T, rng.standard_normal(m), rng.standard_normal(), variant)
    p = quadratic_form_to_coeffs(q)
    x = rng.uniform(-1, 1, (100, 2))
    assert np.max(np.abs(p(x) - q(x))) <= 1e-12
    assert p.degree == 4


def test_form_symmetry_from_upper_triangle():
    q = QuadraticForm(2, 1, [[1.0, 2.0], [7.0, 3.0]])
    assert np.array_equal(q.Q, q.Q.T)
    assert q.Q[1, 0] == 2.0


def test_form_shape_validation():
    with pytest.raises(ValueError):
        QuadraticForm(2, 2, np.eye(2))
    with pytest.raises(ValueError):
        QuadraticForm(2, 1, np.eye(2), np.zeros(3))


def test_polynomial_json_round_trip(rng):
    p = random_poly(rng, 3, 2)
    q = Polynomial.from_json(p.to_json())
    np.testing.assert_array_equal(p.coeffs, q.coeffs)
    assert q.basis == p.basis


def test_polynomial_json_rejects_foreign_monomials():
    with pytest.raises(ValueError):
        Polynomial.from_json({"n": 2, "degree": 1, "coeffs": [{"exponents": [2, 0], "value": 1.0}]})


def test_lift_keeps_values(rng):
    p = random_poly(rng, 2, 2)
    x = rng.uniform(-1, 1, (5, 2))
    np.testing.assert_allclose(p.lift(4)(x), p(x), rtol=1e-14)
    with pytest.raises(ValueError):
        p.lift(1)
