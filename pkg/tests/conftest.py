import numpy as np
import pytest

from momfit.basis import Polynomial, enumerate_monomials
from momfit.moments import Dataset


def random_poly(rng, n, d, scale=1.0):
    basis = enumerate_monomials(n, d)
    return Polynomial(basis, scale * rng.standard_normal(len(basis)))


def naive_eval(p: Polynomial, pts):
    pts = np.atleast_2d(pts)
    out = np.zeros(pts.shape[0])
    for g, c in zip(p.basis.exponents, p.coeffs):
        out += c * np.prod(pts ** np.array(g), axis=1)
    return out


def two_clusters(count, seed, sigma=0.15, mean=0.4, n=2):
    rng = np.random.default_rng(seed)
    a = rng.normal(mean, sigma, (count, n))
    b = rng.normal(-mean, sigma, (count, n))
    return Dataset(a), Dataset(b)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def circle4():
    return Dataset([[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]])


@pytest.fixture
def square4():
    return Dataset([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])


def random_maxdet(seed, nvars=None, nblocks=None):
    """Random strictly feasible, bounded maxdet problem (z = 0 is interior)."""
    from momfit.solver import AffineLmiBlock, MaxDetProblem

    rng = np.random.default_rng(seed)
    nv = int(nvars or rng.integers(2, 31))
    blocks = []
    for j in range(int(nblocks or rng.integers(1, 4))):
        m = int(rng.integers(2, 21))
        B = rng.standard_normal((m, m))
        A = rng.standard_normal((nv, m, m)) / np.sqrt(m * nv)
        A = A + A.transpose(0, 2, 1)
        blocks.append(AffineLmiBlock(B @ B.T / m + np.eye(m), A, f"F{j}"))
    g = int(rng.integers(2, 8))
    Gk = rng.standard_normal((nv, g, g)) / np.sqrt(g * nv)
    det = AffineLmiBlock(np.eye(g), Gk + Gk.transpose(0, 2, 1), "G")
    c = rng.standard_normal(nv)
    return MaxDetProblem(nv, c, blocks, det, 1.0, lower=-5.0, upper=5.0)


def pytest_terminal_summary(terminalreporter):
    from .test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for num in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[num])
