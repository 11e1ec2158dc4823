"""Monomial bases, dense polynomials and quadratic-form parameterizations.

Monomials are ordered graded-lexicographically: total degree increases
strictly, and within one degree exponent tuples are sorted in descending
lexicographic order, so for ``n = 2`` the degree-2 basis reads
``1, x1, x2, x1^2, x1*x2, x2^2``.  A basis of degree ``d`` is therefore a
prefix of the basis of degree ``d + 1``.
"""

from __future__ import annotations

import itertools
import math
import sys
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels


class BasisSizeError(ValueError):
    """Raised when a basis would not fit the platform index range."""


@dataclass(frozen=True, eq=False)
class MonomialBasis:
    """Ordered exponent tuples ``{gamma : |gamma| <= d}`` in ``n`` variables."""

    n: int
    d: int
    exponents: tuple[tuple[int, ...], ...]
    index: dict = field(repr=False, compare=False)
    # mono[k] = mono[parent[k]] * x[var[k]] for k >= 1
    parent: np.ndarray = field(repr=False, compare=False)
    var: np.ndarray = field(repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.exponents)

    def __eq__(self, other):
        if not isinstance(other, MonomialBasis):
            return NotImplemented
        return self.n == other.n and self.d == other.d

    def __hash__(self):
        return hash((self.n, self.d))

    @property
    def degrees(self) -> np.ndarray:
        return np.array([sum(g) for g in self.exponents], dtype=np.int64)

    def degree_slice(self, k: int) -> slice:
        """Positions of the monomials of total degree exactly ``k``."""
        if not 0 <= k <= self.d:
            raise ValueError(f"degree {k} outside 0..{self.d}")
        lo = math.comb(self.n + k - 1, self.n) if k > 0 else 0
        hi = math.comb(self.n + k, self.n)
        return slice(lo, hi)

    def evaluate(self, points) -> np.ndarray:
        """Matrix of all basis monomials at each row of ``points``."""
        pts = _as_points(points, self.n)
        return kernels.monomial_matrix(pts, self.parent, self.var)


def enumerate_monomials(n: int, d: int) -> MonomialBasis:
    """Return the graded-lex basis of all monomials of degree at most ``d``."""
    return _enumerate(int(n), int(d))


def _comb_exceeds(a: int, k: int, limit: int) -> bool:
    """Whether ``C(a, k) > limit``, stopping as soon as the partial product does."""
    v = 1
    for i in range(1, k + 1):
        # C(a-k+i, i) grows monotonically in i
        v = v * (a - k + i) // i
        if v > limit:
            return True
    return False


@lru_cache(maxsize=64)
def _enumerate(n: int, d: int) -> MonomialBasis:
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if d < 0:
        raise ValueError(f"degree must be >= 0, got {d}")
    if _comb_exceeds(n + d, min(n, d), sys.maxsize):
        raise BasisSizeError(f"basis of C({n}+{d},{d}) monomials overflows the index range")
    exps = []
    for k in range(d + 1):
        for combo in itertools.combinations_with_replacement(range(n), k):
            g = [0] * n
            for i in combo:
                g[i] += 1
            exps.append(tuple(g))
    index = {g: i for i, g in enumerate(exps)}
    parent = np.zeros(len(exps), dtype=np.int64)
    var = np.zeros(len(exps), dtype=np.int64)
    for k, g in enumerate(exps[1:], start=1):
        i = next(j for j, e in enumerate(g) if e > 0)
        p = list(g)
        p[i] -= 1
        parent[k] = index[tuple(p)]
        var[k] = i
    parent.setflags(write=False)
    var.setflags(write=False)
    return MonomialBasis(n, d, tuple(exps), index, parent, var)


def _as_points(points, n: int) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if pts.ndim != 2 or pts.shape[1] != n:
        raise ValueError(f"expected points of dimension {n}, got shape {np.shape(points)}")
    return np.ascontiguousarray(pts)


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Dense coefficient vector over a :class:`MonomialBasis`."""

    basis: MonomialBasis
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=np.float64).ravel()
        if c.shape[0] != len(self.basis):
            raise ValueError(f"{c.shape[0]} coefficients for a basis of length {len(self.basis)}")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def degree(self) -> int:
        return self.basis.d

    def __call__(self, x):
        return eval_polynomial(self, x)

    def __add__(self, other: Polynomial) -> Polynomial:
        if self.basis != other.basis:
            raise ValueError("polynomials live on different bases")
        return Polynomial(self.basis, self.coeffs + other.coeffs)

    def __sub__(self, other: Polynomial) -> Polynomial:
        return self + (-1.0) * other

    def __mul__(self, a: float) -> Polynomial:
        return Polynomial(self.basis, float(a) * self.coeffs)

    __rmul__ = __mul__

    def __neg__(self) -> Polynomial:
        return -1.0 * self

    def lift(self, d: int) -> Polynomial:
        """Same polynomial expressed on the degree-``d`` basis (``d >= degree``)."""
        if d < self.degree:
            raise ValueError(f"cannot lift a degree-{self.degree} polynomial to degree {d}")
        big = enumerate_monomials(self.n, d)
        c = np.zeros(len(big))
        c[: len(self.basis)] = self.coeffs
        return Polynomial(big, c)

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "degree": self.degree,
            "coeffs": [
                {"exponents": list(g), "value": float(v)}
                for g, v in zip(self.basis.exponents, self.coeffs)
                if v != 0.0
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> Polynomial:
        basis = enumerate_monomials(int(obj["n"]), int(obj["degree"]))
        c = np.zeros(len(basis))
        for term in obj["coeffs"]:
            g = tuple(int(e) for e in term["exponents"])
            if g not in basis.index:
                raise ValueError(f"exponents {list(g)} not in the degree-{basis.d} basis for n={basis.n}")
            c[basis.index[g]] += float(term["value"])
        return cls(basis, c)

    @classmethod
    def from_terms(cls, n: int, d: int, terms: dict) -> Polynomial:
        """Build from ``{exponent_tuple: value}``; omitted monomials are zero."""
        return cls.from_json({"n": n, "degree": d, "coeffs": [{"exponents": g, "value": v} for g, v in terms.items()]})


def eval_polynomial(p: Polynomial, x):
    """Evaluate ``p`` at one point (returns float) or at each row of an array."""
    x_arr = np.asarray(x, dtype=np.float64)
    single = x_arr.ndim == 1
    if single and x_arr.shape[0] != p.n:
        raise ValueError(f"point has dimension {x_arr.shape[0]}, polynomial expects {p.n}")
    pts = _as_points(x_arr, p.n)
    vals = kernels.poly_eval(pts, p.basis.parent, p.basis.var, p.coeffs)
    return float(vals[0]) if single else vals


# --- quadratic forms ---------------------------------------------------------

HOMOGENEOUS = "homogeneous"
FULL = "full"


def form_monomials(n: int, r: int, variant: str = HOMOGENEOUS) -> list[int]:
    """Positions (in the degree-``r`` basis) of the monomials entering v_r or w_r."""
    basis = enumerate_monomials(n, r)
    if variant == HOMOGENEOUS:
        return list(range(len(basis)))[basis.degree_slice(r)]
    if variant == FULL:
        return list(range(len(basis)))
    raise ValueError(f"unknown quadratic-form variant {variant!r}")


def form_size(n: int, r: int, variant: str = HOMOGENEOUS) -> int:
    return math.comb(n + r - 1, r) if variant == HOMOGENEOUS else math.comb(n + r, r)


@dataclass(frozen=True, eq=False)
class QuadraticForm:
    """``theta(x) = -m(x)' Q m(x) + b' m(x) + c`` with ``m`` = v_r or w_r.

    Only the upper triangle of ``Q`` is read; the stored matrix is
    rebuilt from it so symmetry is exact.
    """

    n: int
    r: int
    Q: np.ndarray
    b: np.ndarray | None = None
    c: float = 0.0
    variant: str = HOMOGENEOUS

    def __post_init__(self):
        m = form_size(self.n, self.r, self.variant)
        Q = np.array(self.Q, dtype=np.float64)
        if Q.shape != (m, m):
            raise ValueError(f"Q must be {m}x{m} for n={self.n}, r={self.r}, variant={self.variant}")
        upper = np.triu(Q)
        Q = upper + np.triu(Q, 1).T
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        if self.b is not None:
            b = np.array(self.b, dtype=np.float64).ravel()
            if b.shape[0] != m:
                raise ValueError(f"b must have length {m}")
            b.setflags(write=False)
            object.__setattr__(self, "b", b)
        object.__setattr__(self, "c", float(self.c))

    def monomials(self, x) -> np.ndarray:
        pts = _as_points(x, self.n)
        full = enumerate_monomials(self.n, self.r).evaluate(pts)
        return full[:, form_monomials(self.n, self.r, self.variant)]

    def __call__(self, x):
        """Direct evaluation of the form, without expanding to coefficients."""
        single = np.asarray(x).ndim == 1
        m = self.monomials(x)
        vals = -np.einsum("ki,ij,kj->k", m, self.Q, m) + self.c
        if self.b is not None:
            vals = vals + m @ self.b
        return float(vals[0]) if single else vals

    def params(self) -> np.ndarray:
        """Flat parameter vector in the layout of :func:`form_coefficient_map`."""
        iu = np.triu_indices(self.Q.shape[0])
        b = self.b if self.b is not None else np.zeros(self.Q.shape[0])
        return np.concatenate([self.Q[iu], b, [self.c]])


def form_coefficient_map(n: int, r: int, variant: str = HOMOGENEOUS):
    """Linear map from flat form parameters to polynomial coefficients.

    Parameters are laid out as the upper triangle of ``Q`` (row major),
    then ``b``, then ``c``.  Returns ``(basis, L)`` with ``basis`` of degree
    ``2r`` and ``L`` of shape ``(len(basis), nparams)`` such that the
    coefficient vector equals ``L @ params``.
    """
    return _form_map(int(n), int(r), variant)


@lru_cache(maxsize=32)
def _form_map(n: int, r: int, variant: str):
    small = enumerate_monomials(n, r)
    big = enumerate_monomials(n, 2 * r)
    pos = form_monomials(n, r, variant)
    m = len(pos)
    iu, ju = np.triu_indices(m)
    nq = iu.size
    L = np.zeros((len(big), nq + m + 1))
    for k, (i, j) in enumerate(zip(iu, ju)):
        gi = small.exponents[pos[i]]
        gj = small.exponents[pos[j]]
        g = tuple(a + b for a, b in zip(gi, gj))
        # off-diagonal entries of Q appear twice in m'Qm
        L[big.index[g], k] -= 1.0 if i == j else 2.0
    for i in range(m):
        L[big.index[small.exponents[pos[i]]], nq + i] += 1.0
    L[0, nq + m] += 1.0
    L.setflags(write=False)
    return big, L


def quadratic_form_to_coeffs(q: QuadraticForm) -> Polynomial:
    """Expand a quadratic form into a coefficient vector of degree ``2r``."""
    basis, L = form_coefficient_map(q.n, q.r, q.variant)
    return Polynomial(basis, L @ q.params())
