import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from momfit.basis import Polynomial, enumerate_monomials
from momfit.moments import (
    Dataset,
    EmpiricalMeasure,
    LocalizingOperator,
    localizing_matrix,
    localizing_operator,
    moment_matrix,
    moment_vector,
    numerical_rank,
    uniform_measure,
)

from .conftest import random_poly


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset([[0.0, np.nan]])
    with pytest.raises(ValueError):
        Dataset(np.zeros((2, 2, 2)))
    assert Dataset([1.0, 2.0]).n == 1
    assert len(Dataset.empty(3)) == 0


def test_uniform_weights():
    assert np.allclose(uniform_measure(Dataset(np.zeros((4, 2)))).weights, 0.25)
    assert uniform_measure(Dataset([[3.0, 1.0]])).weights.tolist() == [1.0]
    w = uniform_measure(Dataset(np.zeros((100_000, 1)))).weights
    assert np.all(w == 1e-5) and abs(w.sum() - 1) <= 1e-12
    with pytest.raises(ValueError):
        uniform_measure(Dataset.empty(2))


def test_measure_validation():
    s = Dataset(np.zeros((2, 1)))
    with pytest.raises(ValueError):
        EmpiricalMeasure(s, [0.7, 0.7])
    with pytest.raises(ValueError):
        EmpiricalMeasure(s, [1.5, -0.5])
    with pytest.raises(ValueError):
        EmpiricalMeasure(s, [1.0])
    m = EmpiricalMeasure.from_weights(s, [3.0, 0.0])
    assert m.support.tolist() == [0]


def test_moment_examples():
    md = moment_vector(uniform_measure(Dataset([[0.0, 0.0], [1.0, 1.0]])), 2)
    assert md[(1, 1)] == 0.5
    assert md[(0, 0)] == 1.0
    md = moment_vector(uniform_measure(Dataset([[1.0, 0.0], [-1.0, 0.0]])), 1)
    assert md[(1, 0)] == 0.0


def test_moments_match_direct_sums(rng):
    pts = rng.uniform(-1, 1, (37, 3))
    w = rng.uniform(0.1, 1, 37)
    m = EmpiricalMeasure.from_weights(Dataset(pts), w)
    md = moment_vector(m, 4)
    for g in md.basis.exponents:
        direct = float(np.sum(m.weights * np.prod(pts ** np.array(g), axis=1)))
        assert abs(md[g] - direct) <= 1e-12 * max(1.0, abs(direct))


def test_zero_weight_atoms_are_ignored(rng):
    pts = rng.uniform(-1, 1, (5, 2))
    m = EmpiricalMeasure(Dataset(pts), [0.5, 0.0, 0.5, 0.0, 0.0])
    ref = moment_vector(uniform_measure(Dataset(pts[[0, 2]])), 4)
    np.testing.assert_allclose(moment_vector(m, 4).y, ref.y, rtol=1e-15, atol=1e-16)


def test_dirac_moment_matrix():
    M = moment_matrix(moment_vector(uniform_measure(Dataset([[0.0, 0.0]])), 2), 1)
    np.testing.assert_array_equal(M, np.diag([1.0, 0.0, 0.0]))


def test_generic_rank(rng):
    M = moment_matrix(moment_vector(uniform_measure(Dataset(rng.standard_normal((3, 2)))), 2), 1)
    assert numerical_rank(M) == 3


def test_moment_matrix_nesting(rng):
    md = moment_vector(uniform_measure(Dataset(rng.standard_normal((20, 2)))), 6)
    M2, M3 = moment_matrix(md, 2), moment_matrix(md, 3)
    np.testing.assert_array_equal(M3[: len(M2), : len(M2)], M2)


def test_insufficient_degree():
    md = moment_vector(uniform_measure(Dataset([[1.0, 2.0]])), 3)
    with pytest.raises(ValueError):
        moment_matrix(md, 2)
    with pytest.raises(ValueError):
        localizing_matrix(md, Polynomial.from_terms(2, 2, {(0, 0): 1.0}), 1)


@settings(max_examples=40)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(0, 3))
def test_moment_matrix_psd(seed, n, r):
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-1, 1, (int(rng.integers(1, 30)), n))
    M = moment_matrix(moment_vector(EmpiricalMeasure.from_weights(Dataset(pts), rng.uniform(0.01, 1, len(pts))), 2 * r), r)
    ev = np.linalg.eigvalsh(M)
    assert np.allclose(M, M.T)
    assert ev[0] >= -1e-10 * max(1.0, ev[-1])


def test_constant_theta_gives_moment_matrix(rng):
    md = moment_vector(uniform_measure(Dataset(rng.standard_normal((10, 2)))), 6)
    one = Polynomial.from_terms(2, 2, {(0, 0): 1.0})
    np.testing.assert_array_equal(localizing_matrix(md, one, 2), moment_matrix(md, 2))


def test_localizing_identity(rng):
    """f' M_r(theta y) f equals the weighted sum of theta f^2 over the atoms."""
    for _ in range(100):
        n = int(rng.integers(1, 4))
        r = int(rng.integers(0, 3))
        dt = int(rng.integers(0, 3))
        pts = rng.uniform(-1, 1, (int(rng.integers(1, 40)), n))
        m = EmpiricalMeasure.from_weights(Dataset(pts), rng.uniform(0.01, 1, len(pts)))
        theta = random_poly(rng, n, dt)
        f = random_poly(rng, n, r)
        L = localizing_matrix(moment_vector(m, 2 * r + dt), theta, r)
        lhs = f.coeffs @ L @ f.coeffs
        terms = m.weights * theta(pts) * f(pts) ** 2
        assert abs(lhs - terms.sum()) <= 1e-10 * max(1.0, np.abs(terms).sum())


def test_localizing_psd_on_support():
    ang = np.linspace(0, 2 * np.pi, 17)[:-1]
    pts = np.column_stack([np.cos(ang), np.sin(ang)])
    theta = Polynomial.from_terms(2, 2, {(0, 0): 1.0, (2, 0): -1.0, (0, 2): -1.0})
    L = localizing_matrix(moment_vector(uniform_measure(Dataset(pts)), 6), theta, 2)
    assert np.linalg.eigvalsh(L)[0] >= -1e-10


def test_localizing_nesting(rng):
    md = moment_vector(uniform_measure(Dataset(rng.standard_normal((15, 2)))), 8)
    theta = random_poly(rng, 2, 2)
    L1, L2 = localizing_matrix(md, theta, 1), localizing_matrix(md, theta, 2)
    assert np.max(np.abs(L2[: len(L1), : len(L1)] - L1)) <= 1e-14 * max(1.0, np.abs(L1).max())


@pytest.mark.parametrize("lazy", [False, True])
def test_operator_matches_direct(rng, lazy):
    m = uniform_measure(Dataset(rng.standard_normal((25, 2))))
    tb = enumerate_monomials(2, 2)
    op = localizing_operator(m, 2, tb, lazy=lazy)
    assert op.lazy is lazy
    md = moment_vector(m, 6)
    M = moment_matrix(md, 2)
    np.testing.assert_array_equal(op.apply(np.eye(len(tb))[0]), M)
    for _ in range(20):
        theta = random_poly(rng, 2, 2)
        direct = localizing_matrix(md, theta, 2)
        assert np.max(np.abs(op.apply(theta.coeffs) - direct)) <= 1e-12
        np.testing.assert_allclose(op.apply(-theta.coeffs), -op.apply(theta.coeffs), rtol=0, atol=0)


def test_operator_compose(rng):
    m = uniform_measure(Dataset(rng.standard_normal((12, 2))))
    tb = enumerate_monomials(2, 2)
    op = localizing_operator(m, 1, tb)
    L = rng.standard_normal((len(tb), 4))
    stack = op.compose(L)
    lazy = LocalizingOperator(op.moments, 1, tb, lazy=True).compose(L)
    for k in range(4):
        np.testing.assert_allclose(stack[k], op.apply(L[:, k]), rtol=1e-13, atol=1e-13)
    np.testing.assert_allclose(stack, lazy, rtol=1e-13, atol=1e-13)
    with pytest.raises(ValueError):
        op.apply(np.zeros(3))


def test_block_size_binomial():
    m = uniform_measure(Dataset(np.random.default_rng(0).standard_normal((40, 3))))
    op = localizing_operator(m, 4, enumerate_monomials(3, 2))
    assert op.size == math.comb(3 + 4, 4) == 35


def test_duplicate_atom_keeps_rank(rng):
    pts = rng.standard_normal((3, 2))
    a = moment_matrix(moment_vector(uniform_measure(Dataset(pts)), 2), 1)
    b = moment_matrix(moment_vector(uniform_measure(Dataset(np.vstack([pts, pts[:1]]))), 2), 1)
    assert numerical_rank(a) == numerical_rank(b) == 3
