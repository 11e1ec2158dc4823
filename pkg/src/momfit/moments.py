"""Empirical measures on point clouds and their moment / localizing matrices."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import kernels
from .basis import MonomialBasis, Polynomial, enumerate_monomials

# Eigenvalues below RANK_TOL * lambda_max count as zero.
RANK_TOL = 1e-8
# Above this many stored floats the localizing operator assembles lazily.
LAZY_LIMIT = 20_000_000


@dataclass(frozen=True, eq=False)
class Dataset:
    """Finite point cloud in R^n; duplicates are kept as distinct atoms."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1) if pts.size else pts.reshape(0, 1)
        if pts.ndim != 2:
            raise ValueError(f"points must be a 2-D array, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise ValueError("dataset contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def empty(cls, n: int) -> Dataset:
        return cls(np.zeros((0, n)))

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def subset(self, mask) -> Dataset:
        return Dataset(self.points[np.asarray(mask)])


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    """Atomic probability measure ``sum_x w_x delta_x`` on a dataset."""

    dataset: Dataset
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).ravel()
        if w.shape[0] != len(self.dataset):
            raise ValueError(f"{w.shape[0]} weights for {len(self.dataset)} points")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        total = kernels.pairwise_rows(w.reshape(-1, 1))[0] if w.size else 0.0
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total!r}, expected 1")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_weights(cls, dataset: Dataset, weights) -> EmpiricalMeasure:
        """Normalize arbitrary nonnegative weights to total mass one."""
        w = np.asarray(weights, dtype=np.float64)
        return cls(dataset, w / w.sum())

    @property
    def n(self) -> int:
        return self.dataset.n

    @property
    def support(self) -> np.ndarray:
        """Indices of the atoms carrying positive weight."""
        return np.flatnonzero(self.weights > 0)


@dataclass(frozen=True, eq=False)
class MomentData:
    basis: MonomialBasis
    y: np.ndarray

    @property
    def order(self) -> int:
        return self.basis.d

    def __getitem__(self, alpha) -> float:
        return float(self.y[self.basis.index[tuple(alpha)]])


def uniform_measure(s: Dataset) -> EmpiricalMeasure:
    if len(s) == 0:
        raise ValueError("uniform measure on an empty dataset")
    return EmpiricalMeasure(s, np.full(len(s), 1.0 / len(s)))


def moment_vector(m: EmpiricalMeasure, order: int) -> MomentData:
    """All moments ``y_alpha = sum_x w_x x^alpha`` with ``|alpha| <= order``."""
    if order < 0:
        raise ValueError("moment order must be >= 0")
    basis = enumerate_monomials(m.n, order)
    keep = m.support
    y = kernels.weighted_moments(m.dataset.points[keep], m.weights[keep], basis.parent, basis.var)
    y.setflags(write=False)
    return MomentData(basis, y)


@lru_cache(maxsize=128)
def _shift_index(n: int, r: int, dshift: int) -> np.ndarray:
    """``idx[g, a, b]`` = position of ``alpha_a + beta_b + gamma_g`` in the
    degree ``2r + dshift`` basis, for ``|gamma| <= dshift``."""
    small = enumerate_monomials(n, r)
    shifts = enumerate_monomials(n, dshift)
    big = enumerate_monomials(n, 2 * r + dshift)
    E = np.array(small.exponents, dtype=np.int64)
    G = np.array(shifts.exponents, dtype=np.int64)
    m, t = len(small), len(shifts)
    idx = np.empty((t, m, m), dtype=np.int64)
    for g in range(t):
        for a in range(m):
            for b in range(a, m):
                k = big.index[tuple(E[a] + E[b] + G[g])]
                idx[g, a, b] = k
                idx[g, b, a] = k
    idx.setflags(write=False)
    return idx


def _require_order(md: MomentData, need: int):
    if md.order < need:
        raise ValueError(f"moments of degree {need} required, only {md.order} available")


def moment_matrix(md: MomentData, r: int) -> np.ndarray:
    """``M_r(y)[a, b] = y_{alpha_a + beta_b}``, rows ordered as the degree-r basis."""
    _require_order(md, 2 * r)
    idx = _shift_index(md.basis.n, r, 0)[0]
    return md.y[idx]


def localizing_matrix(md: MomentData, theta: Polynomial, r: int) -> np.ndarray:
    """``M_r(theta y)[a, b] = sum_gamma theta_gamma y_{alpha_a + beta_b + gamma}``."""
    if theta.n != md.basis.n:
        raise ValueError("polynomial and moments have different dimensions")
    _require_order(md, 2 * r + theta.degree)
    idx = _shift_index(md.basis.n, r, theta.degree)
    m = idx.shape[1]
    out = np.zeros((m, m))
    for g in np.flatnonzero(theta.coeffs):
        out += theta.coeffs[g] * md.y[idx[g]]
    return out


class LocalizingOperator:
    """The family ``{M_r^gamma(y)}`` for ``gamma`` in a coefficient basis.

    Applying it to a coefficient vector gives ``M_r(theta y)``.  The stack of
    matrices is materialized on construction unless it would exceed
    ``LAZY_LIMIT`` floats, in which case entries are gathered per call.
    """

    def __init__(self, md: MomentData, r: int, theta_basis: MonomialBasis, lazy: bool | None = None):
        _require_order(md, 2 * r + theta_basis.d)
        self.r = r
        self.theta_basis = theta_basis
        self.moments = md
        self._idx = _shift_index(md.basis.n, r, theta_basis.d)
        t, m, _ = self._idx.shape
        self.size = m
        self.lazy = (t * m * m > LAZY_LIMIT) if lazy is None else lazy
        self._stack = None if self.lazy else md.y[self._idx]

    def matrix(self, g: int) -> np.ndarray:
        """``M_r^gamma(y)`` for the basis position ``g``."""
        if self._stack is not None:
            return self._stack[g]
        return self.moments.y[self._idx[g]]

    @property
    def stack(self) -> np.ndarray:
        if self._stack is not None:
            return self._stack
        return self.moments.y[self._idx]

    def apply(self, coeffs) -> np.ndarray:
        c = np.asarray(coeffs, dtype=np.float64)
        if c.shape[0] != len(self.theta_basis):
            raise ValueError(f"expected {len(self.theta_basis)} coefficients, got {c.shape[0]}")
        if self._stack is not None:
            return np.tensordot(c, self._stack, axes=1)
        out = np.zeros((self.size, self.size))
        for g in np.flatnonzero(c):
            out += c[g] * self.moments.y[self._idx[g]]
        return out

    def compose(self, L: np.ndarray) -> np.ndarray:
        """Matrices ``sum_gamma L[gamma, k] M^gamma`` for every column ``k`` of ``L``.

        Used to turn an affine parameterization of the coefficients into
        one LMI coefficient matrix per decision variable.
        """
        L = np.asarray(L, dtype=np.float64)
        if self._stack is not None:
            return np.tensordot(L.T, self._stack, axes=1)
        return np.stack([self.apply(L[:, k]) for k in range(L.shape[1])])


def localizing_operator(m: EmpiricalMeasure, r: int, theta_basis: MonomialBasis, lazy: bool | None = None) -> LocalizingOperator:
    md = moment_vector(m, 2 * r + theta_basis.d)
    return LocalizingOperator(md, r, theta_basis, lazy=lazy)


def numerical_rank(M, rel_tol: float = RANK_TOL) -> int:
    ev = np.linalg.eigvalsh(np.asarray(M, dtype=np.float64))
    top = ev[-1] if ev.size else 0.0
    if top <= 0:
        return 0
    return int(np.sum(ev > rel_tol * top))


def range_basis(M, rel_tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical range of a PSD matrix."""
    ev, V = np.linalg.eigh(np.asarray(M, dtype=np.float64))
    top = ev[-1] if ev.size else 0.0
    keep = ev > rel_tol * top if top > 0 else np.zeros(ev.shape, dtype=bool)
    return V[:, keep]
