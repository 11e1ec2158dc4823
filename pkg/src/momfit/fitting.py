"""Problem builders for covering / separation and the support-selection loop.

Every formulation becomes a :class:`~momfit.solver.MaxDetProblem`.  The
decision vector holds the parameters of the separating polynomial (for the
maxdet objectives the upper triangle of ``Q``, then ``b``, then ``c``),
followed by any auxiliary variables a formulation needs.

Sign constraints on the data enter either point by point (one scalar block
per point) or through localizing matrices of empirical measures, one LMI per
class.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import solver as slv
from .basis import FULL, HOMOGENEOUS, Polynomial, enumerate_monomials, form_coefficient_map, form_size
from .moments import (
    Dataset,
    EmpiricalMeasure,
    LocalizingOperator,
    moment_matrix,
    moment_vector,
    uniform_measure,
)

log = logging.getLogger(__name__)

PER_POINT = "per-point"
MOMENT = "moment"
LP = "lp"

SEPARATED = "Separated"
INFEASIBLE = "Infeasible"
ITERATION_LIMIT = "IterationLimit"

EVAL_TOL = 1e-9
# facial reduction drops only directions that are null to roundoff; a support
# close to a degree-r variety keeps its tiny eigenvalues (and exactness)
FACE_TOL = 1e-13
# below this eigenvalue ratio the moment-built whitening loses accuracy and
# the block is assembled from the atoms instead
COND_LIMIT = 1e-8
# singular values of sqrt(w) P below SV_TOL * largest count as zero
SV_TOL = 1e-10

LITERAL = "literal"
ACCUMULATE = "accumulate"
EXCHANGE = "exchange"
UPDATE_RULES = (LITERAL, ACCUMULATE, EXCHANGE)


class DegenerateData(ValueError):
    """The points do not affinely span R^n."""


class FitError(RuntimeError):
    """Inner solver failure, raised with the outer-iteration context."""


# --- parameterizations ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FormParameterization:
    """Coefficients of theta as ``offset + L @ z[:nparams]``.

    ``L`` has one column per variable of the full decision vector so that
    auxiliary variables (appended after the form parameters) map to zero.
    """

    n: int
    d: int
    variant: str
    L: np.ndarray
    offset: np.ndarray
    nvars: int
    m: int = 0
    nq: int = 0

    @property
    def basis(self):
        return enumerate_monomials(self.n, self.d)

    def polynomial(self, z) -> Polynomial:
        return Polynomial(self.basis, self.offset + self.L @ np.asarray(z, dtype=np.float64))

    def Q(self, z) -> np.ndarray:
        iu = np.triu_indices(self.m)
        Q = np.zeros((self.m, self.m))
        Q[iu] = z[: self.nq]
        return Q + np.triu(Q, 1).T

    def b(self, z) -> np.ndarray:
        if self.variant == FULL:
            return np.zeros(self.m)
        return np.asarray(z[self.nq : self.nq + self.m], dtype=np.float64)

    def c(self, z) -> float:
        return 1.0 if self.variant == FULL else float(z[self.nq + self.m])

    def q_matrices(self) -> np.ndarray:
        """``A[k]`` with ``Q(z) = sum_k z_k A[k]`` over the full decision vector."""
        A = np.zeros((self.nvars, self.m, self.m))
        iu, ju = np.triu_indices(self.m)
        for k, (i, j) in enumerate(zip(iu, ju)):
            A[k, i, j] = 1.0
            A[k, j, i] = 1.0
        return A

    def bordered_block(self) -> slv.AffineLmiBlock:
        """``[[Q, b/2], [b'/2, 1 - c]] >= 0``."""
        m = self.m
        A = np.zeros((self.nvars, m + 1, m + 1))
        A[:, :m, :m] = self.q_matrices()
        for i in range(m):
            A[self.nq + i, i, m] = A[self.nq + i, m, i] = 0.5
        A[self.nq + m, m, m] = -1.0
        A0 = np.zeros((m + 1, m + 1))
        A0[m, m] = 1.0
        return slv.AffineLmiBlock(A0, A, "bordered")

    def objective_value(self, z) -> float:
        """``logdet Q^{-1}``."""
        sign, ld = np.linalg.slogdet(self.Q(z))
        return -ld if sign > 0 else np.inf


def form_parameterization(n: int, d: int, variant: str = HOMOGENEOUS, extra: int = 0) -> FormParameterization:
    """Quadratic-form parameterization of a degree-``d`` theta (``d`` even)."""
    if d not in (2, 4):
        raise ValueError(f"maxdet objectives need an even degree in {{2, 4}}, got {d}")
    r = d // 2
    basis, Lf = form_coefficient_map(n, r, variant)
    m = form_size(n, r, variant)
    nq = m * (m + 1) // 2
    offset = np.zeros(len(basis))
    if variant == FULL:
        # theta = 1 - w'Qw: only Q is free
        Lf = Lf[:, :nq]
        offset[0] = 1.0
    nparams = Lf.shape[1]
    L = np.zeros((len(basis), nparams + extra))
    L[:, :nparams] = Lf
    return FormParameterization(n, d, variant, L, offset, nparams + extra, m, nq)


def coefficient_parameterization(n: int, d: int) -> FormParameterization:
    """Split ``theta = theta_plus - theta_minus`` used by the l1 objective."""
    t = math.comb(n + d, d)
    L = np.hstack([np.eye(t), -np.eye(t)])
    return FormParameterization(n, d, "l1", L, np.zeros(t), 2 * t)


# --- constraint assembly --------------------------------------------------------


def _check_span(s: Dataset):
    if len(s) == 0:
        raise DegenerateData("empty dataset")
    pts = s.points - s.points.mean(axis=0)
    scale = max(1.0, float(np.abs(s.points).max()))
    if len(s) < s.n + 1 or np.linalg.matrix_rank(pts, tol=1e-10 * scale * math.sqrt(len(s))) < s.n:
        raise DegenerateData(f"the {len(s)} points do not affinely span R^{s.n}")


def _as_measure(s) -> EmpiricalMeasure | None:
    if s is None:
        return None
    if isinstance(s, EmpiricalMeasure):
        return s
    if len(s) == 0:
        return None
    return uniform_measure(s)


def _as_dataset(s) -> Dataset | None:
    if s is None:
        return None
    if isinstance(s, EmpiricalMeasure):
        return s.dataset.subset(s.support)
    return s


def _point_rows(s: Dataset, L, offset, sign: float, name: str) -> slv.ScalarBlocks:
    """``sign * theta(x) >= 0`` for every point, as rows in the decision vector."""
    P = enumerate_monomials(s.n, _degree_of(L, s.n)).evaluate(s.points)
    return slv.ScalarBlocks(sign * (P @ L), sign * (P @ offset), name)


def _degree_of(L, n):
    t = L.shape[0]
    d = 0
    while math.comb(n + d, d) < t:
        d += 1
    return d


def atom_face(m: EmpiricalMeasure, r: int):
    """Left singular vectors of ``diag(sqrt(w)) P`` spanning its range.

    ``P`` holds the degree-``r`` monomials of the support atoms, so
    ``M_r(y) = P' diag(w) P`` and the singular values here are the square
    roots of its eigenvalues, resolved to rounding instead of its square.
    """
    keep = m.support
    P = enumerate_monomials(m.n, r).evaluate(m.dataset.points[keep])
    U, sv, _ = np.linalg.svd(np.sqrt(m.weights[keep])[:, None] * P, full_matrices=False)
    return U[:, sv > SV_TOL * sv[0]], keep


def localizing_block(m: EmpiricalMeasure, r: int, L, offset, name: str, reduce: bool = True) -> slv.AffineLmiBlock:
    """``M_r((offset + L z) y) >= 0`` for the moments of ``m``.

    With ``reduce`` the block is congruence-transformed by
    ``W = U diag(lambda)^{-1/2}`` built from the eigenpairs of ``M_r(y)``
    above ``FACE_TOL``.  Directions in the kernel of ``M_r(y)`` are also in
    the kernel of every ``M_r(theta y)``, so dropping them loses nothing and
    restores an interior when the support is smaller than the block.  The
    scaling maps ``theta = 1`` to the identity, so block margins are on the
    scale of ``theta``'s values even for nearly degenerate supports, and it
    only shifts the barrier by a constant.

    When ``M_r(y)`` is worse conditioned than ``COND_LIMIT`` (near-duplicate
    atoms, as after perturbation) the same whitened block is assembled as
    ``U' diag(theta(x)) U`` with ``U`` from :func:`atom_face`, which equals
    the moment form by the localizing identity but avoids squaring the
    conditioning.
    """
    d = _degree_of(L, m.n)
    theta_basis = enumerate_monomials(m.n, d)
    md = moment_vector(m, 2 * r + d)
    if reduce:
        ev, V = np.linalg.eigh(moment_matrix(md, r))
        keep = ev > FACE_TOL * ev[-1]
        if ev[keep][0] < COND_LIMIT * ev[-1]:
            U, atoms = atom_face(m, r)
            Pt = theta_basis.evaluate(m.dataset.points[atoms])
            A0 = (U.T * (Pt @ offset)) @ U
            A = np.einsum("ia,ik,ib->kab", U, Pt @ L, U, optimize=True)
        else:
            op = LocalizingOperator(md, r, theta_basis)
            W = V[:, keep] / np.sqrt(ev[keep])
            A0 = W.T @ op.apply(offset) @ W
            A = np.einsum("ia,kij,jb->kab", W, op.compose(L), W)
    else:
        op = LocalizingOperator(md, r, theta_basis)
        A0 = op.apply(offset)
        A = op.compose(L)
    A0 = 0.5 * (A0 + A0.T)
    A = 0.5 * (A + A.transpose(0, 2, 1))
    return slv.AffineLmiBlock(A0, A, name)


def _class_constraints(s1, s2, L, offset, mode, r, L2=None, offset2=None):
    """Constraints ``theta >= 0`` on class 1 and ``theta2 >= 0`` on class 2
    (``theta2`` defaults to ``-theta``)."""
    if L2 is None:
        L2, offset2 = -L, -offset
    out = []
    if mode == PER_POINT:
        d1, d2 = _as_dataset(s1), _as_dataset(s2)
        if d1 is not None and len(d1):
            out.append(_point_rows(d1, L, offset, 1.0, "S1"))
        if d2 is not None and len(d2):
            out.append(_point_rows(d2, L2, offset2, 1.0, "S2"))
    elif mode == MOMENT:
        if r is None:
            raise ValueError("moment mode needs a relaxation order r")
        m1, m2 = _as_measure(s1), _as_measure(s2)
        if m1 is not None:
            out.append(localizing_block(m1, r, L, offset, "M_r(theta y1)"))
        if m2 is not None:
            out.append(localizing_block(m2, r, L2, offset2, "M_r(-theta y2)"))
    else:
        raise ValueError(f"unknown constraint mode {mode!r}")
    return out


def _maxdet_problem(s1, s2, d, r, mode, variant) -> tuple[slv.MaxDetProblem, FormParameterization]:
    d1 = _as_dataset(s1)
    n = d1.n
    par = form_parameterization(n, d, variant)
    cons = []
    if variant == HOMOGENEOUS:
        cons.append(par.bordered_block())
    cons += _class_constraints(s1, s2, par.L, par.offset, mode, r)
    det = slv.AffineLmiBlock(np.zeros((par.m, par.m)), par.q_matrices(), "Q")
    prob = slv.MaxDetProblem(par.nvars, np.zeros(par.nvars), tuple(cons), det)
    return prob, par


def build_mvce_problem(s, d: int = 2, r: int | None = None, mode: str = PER_POINT, variant: str = HOMOGENEOUS):
    """Minimum-volume covering problem: ``min logdet Q^-1`` s.t. ``theta >= 0`` on ``s``.

    Returns ``(problem, parameterization)``.
    """
    _check_span(_as_dataset(s))
    return _maxdet_problem(s, None, d, r if r is not None else d, mode, variant)


def build_separation_problem(s1, s2, d: int = 2, r: int | None = None, mode: str = PER_POINT, variant: str = HOMOGENEOUS):
    """Minimum-volume separation: ``theta >= 0`` on ``s1``, ``theta <= 0`` on ``s2``.

    With ``s2`` empty this is exactly :func:`build_mvce_problem`.
    """
    d2 = _as_dataset(s2)
    if d2 is None or len(d2) == 0:
        return build_mvce_problem(s1, d, r, mode, variant)
    d1 = _as_dataset(s1)
    if d1 is None or len(d1) == 0:
        raise DegenerateData("the first class is empty")
    return _maxdet_problem(s1, s2, d, r if r is not None else d, mode, variant)


def build_moment_relaxation(m1, m2, r: int, objective: str = "maxdet", d: int = 2, variant: str = HOMOGENEOUS, anchor=None):
    """Relaxation with one localizing LMI per class (``m2`` may be None)."""
    if objective in ("maxdet", "maxdet-ellipsoid", "maxdet-quartic"):
        if objective == "maxdet-ellipsoid" and d != 2 or objective == "maxdet-quartic" and d != 4:
            raise ValueError(f"objective {objective} does not match degree {d}")
        return _maxdet_problem(m1, m2, d, r, MOMENT, variant)
    if objective == "l1":
        return _l1_problem(m1, m2, d, MOMENT, r, anchor)
    raise ValueError(f"unknown objective {objective!r}")


def build_feasibility_problem(s1, s2, d: int = 2, mode: str = PER_POINT, r: int | None = None, floor: float = 1e-4, variant: str = HOMOGENEOUS):
    """``min delta`` s.t. ``theta >= 0`` on ``s1`` and ``theta <= delta`` on ``s2``.

    ``theta = 0`` makes ``delta = 0`` feasible for any data, so the form is
    normalized with ``floor * I <= Q <= I``.  Together with the bordered
    block this bounds the feasible set and keeps ``theta`` an ellipsoid-type
    set of condition number at most ``1/floor``.  ``delta <= 0`` then means
    separable.  Since ``theta <= 1`` everywhere, ``delta`` is boxed to
    ``[-1, 2]``; -1 is the value returned when ``s2`` is empty.
    """
    d1 = _as_dataset(s1)
    par = form_parameterization(d1.n, d, variant, extra=1)
    k = par.nvars - 1
    cons = []
    if variant == HOMOGENEOUS:
        cons.append(par.bordered_block())
    cons.append(slv.AffineLmiBlock(-floor * np.eye(par.m), par.q_matrices(), "Q - floor I"))
    cons.append(slv.AffineLmiBlock(np.eye(par.m), -par.q_matrices(), "I - Q"))
    L2 = -par.L.copy()
    L2[0, k] = 1.0
    cons += _class_constraints(s1, s2, par.L, par.offset, mode, r if r is not None else d, L2, -par.offset)
    c = np.zeros(par.nvars)
    c[k] = 1.0
    lower = np.full(par.nvars, -np.inf)
    upper = np.full(par.nvars, np.inf)
    lower[k], upper[k] = -1.0, 2.0
    return slv.MaxDetProblem(par.nvars, c, tuple(cons), lower=lower, upper=upper), par


def _l1_problem(s1, s2, d, mode, r, anchor):
    d1 = _as_dataset(s1)
    n = d1.n
    par = coefficient_parameterization(n, d)
    cons = _class_constraints(s1, s2, par.L, par.offset, mode, r)
    if anchor is None:
        anchor = d1.points.mean(axis=0)
    P = enumerate_monomials(n, d).evaluate(anchor)
    cons.append(slv.ScalarBlocks(P @ par.L, np.array([-1.0]), "anchor"))
    prob = slv.MaxDetProblem(par.nvars, np.ones(par.nvars), tuple(cons), lower=np.zeros(par.nvars))
    return prob, par


def build_l1_lp(s1, s2, d: int, anchor=None):
    """``min ||theta||_1`` with per-point sign constraints.

    ``theta = 0`` is always feasible for the unnormalized problem, so
    ``theta(anchor) >= 1`` is imposed at the centroid of ``s1`` (or the given
    anchor).
    """
    return _l1_problem(s1, s2, d, PER_POINT, None, anchor)


# --- evaluation helpers ---------------------------------------------------------


def outside_masks(s1: Dataset, s2: Dataset | None, theta: Polynomial, eval_tol: float = EVAL_TOL):
    v1 = theta(s1.points) if len(s1) else np.zeros(0)
    v2 = theta(s2.points) if s2 is not None and len(s2) else np.zeros(0)
    return v1 < -eval_tol, v2 > eval_tol


def outside_points(s1: Dataset, s2: Dataset | None, theta: Polynomial, eval_tol: float = EVAL_TOL):
    """Misclassified points: ``theta < -eval_tol`` on ``s1``, ``theta > eval_tol`` on ``s2``."""
    if s2 is not None and s1.n != s2.n or s1.n != theta.n:
        raise ValueError("dimension mismatch between datasets and polynomial")
    o1, o2 = outside_masks(s1, s2, theta, eval_tol)
    n = s1.n
    return s1.subset(o1), (s2.subset(o2) if s2 is not None else Dataset.empty(n))


def rank_check(m: EmpiricalMeasure, r: int):
    """Numerical rank of ``M_r(y)`` and whether it is as large as possible.

    The rank is read off the singular values of ``diag(sqrt(w)) P`` (see
    :func:`atom_face`), which resolves perturbations far below what the
    eigenvalues of ``M_r(y)`` itself can show.
    """
    if np.any(m.weights <= 0):
        raise ValueError("rank_check needs strictly positive weights")
    rank = atom_face(m, r)[0].shape[1]
    return rank, rank == min(len(m.support), math.comb(m.n + r, r))


def perturb_datasets(s1: Dataset, s2: Dataset | None, target_size, epsilon: float = 1e-4, rng=None):
    """Replicate-then-jitter so the point sets become generic.

    Each set is padded to ``target_size`` points by repeating its first point,
    then every point moves by ``epsilon`` along a uniformly random direction.
    ``target_size`` may be one count or a pair; an empty set stays empty.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    rng = np.random.default_rng(rng)
    sizes = (target_size, target_size) if np.isscalar(target_size) else tuple(target_size)
    out = []
    for s, size in zip((s1, s2), sizes):
        if s is None:
            out.append(None)
            continue
        if len(s) == 0:
            out.append(s)
            continue
        if size < len(s):
            raise ValueError(f"target size {size} is smaller than the dataset ({len(s)})")
        pts = np.vstack([s.points, np.repeat(s.points[:1], size - len(s), axis=0)])
        u = rng.standard_normal(pts.shape)
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        out.append(Dataset(pts + epsilon * u))
    return out[0], out[1]


# --- the support-selection loop -------------------------------------------------


@dataclass
class SeparationInstance:
    s1: Dataset
    s2: Dataset
    d: int = 2
    r: int | None = None
    objective: str = "maxdet"
    variant: str = HOMOGENEOUS

    def __post_init__(self):
        if self.s2 is None:
            self.s2 = Dataset.empty(self.s1.n)
        if len(self.s1) == 0:
            raise ValueError("the first class must be non-empty")
        if self.s1.n != self.s2.n:
            raise ValueError("the two classes have different dimensions")
        if self.objective != "l1" and self.d % 2:
            raise ValueError(f"maxdet objectives need an even degree, got {self.d}")
        if self.r is None:
            self.r = self.d


@dataclass
class FitSettings:
    """Outer-loop options; see :func:`run_main_algorithm` for the update rules."""

    max_outer: int = 50
    # support update: literal step 4, accumulate, or capped exchange
    update: str = "literal"
    eval_tol: float = EVAL_TOL
    # points with |theta| at or below this count as boundary in the update
    support_tol: float = 1e-6
    # optimal geometric mean det(Q)^(1/m) at or below this means infeasible
    zero_tol: float = 1e-7
    # feasibility-problem slack above this certifies infeasibility
    infeas_tol: float = 1e-7
    feasibility_floor: float = 1e-4
    # per-point solves: sets larger than direct_limit use constraint generation
    direct_limit: int = 2000
    row_block: int = 256
    max_rounds: int = 100
    solver: slv.Settings = field(default_factory=slv.Settings)


@dataclass
class FitReport:
    theta: Polynomial | None
    objective: float
    status: str
    outer_iterations: int
    support_sizes: list = field(default_factory=list)
    history: list = field(default_factory=list)
    mode: str = MOMENT
    params: dict = field(default_factory=dict)
    message: str = ""

    def to_json(self) -> dict:
        obj = float(self.objective)
        return {
            "status": self.status,
            "mode": self.mode,
            "polynomial": self.theta.to_json() if self.theta is not None else None,
            "objective": obj if math.isfinite(obj) else repr(obj),
            "outer_iterations": self.outer_iterations,
            "support_sizes": [list(map(int, s)) for s in self.support_sizes],
            "history": self.history,
            "params": self.params,
            "message": self.message,
        }

    @classmethod
    def from_json(cls, obj: dict) -> FitReport:
        poly = obj.get("polynomial")
        return cls(
            theta=Polynomial.from_json(poly) if poly is not None else None,
            objective=float(obj["objective"]),
            status=obj["status"],
            outer_iterations=int(obj.get("outer_iterations", 0)),
            support_sizes=[tuple(s) for s in obj.get("support_sizes", [])],
            history=list(obj.get("history", [])),
            mode=obj.get("mode", MOMENT),
            params=dict(obj.get("params", {})),
            message=obj.get("message", ""),
        )


def _params_dict(par: FormParameterization, z) -> dict:
    if par.variant == "l1":
        return {}
    return {"Q": par.Q(z).tolist(), "b": par.b(z).tolist(), "c": par.c(z), "variant": par.variant}


def _objective_of(inst, par, z) -> float:
    if inst.objective == "l1":
        return float(np.sum(z))
    return par.objective_value(z)


def feasibility_slack(s1, s2, d: int, mode: str = PER_POINT, r: int | None = None, settings: FitSettings | None = None, variant=HOMOGENEOUS):
    """Optimal slack of :func:`build_feasibility_problem` (inf if not solved)."""
    settings = settings or FitSettings()
    # Q >= floor I with c <= 1 needs floor * radius^2 < 1 to admit theta > 0 on s1
    radius = max(float(np.abs(x.points).max(initial=0.0)) for x in (_as_dataset(s1), _as_dataset(s2)) if x is not None)
    floor = settings.feasibility_floor / max(1.0, 2.0 * s1.n * radius**2)
    prob, par = build_feasibility_problem(s1, s2, d, mode, r, floor, variant)
    sol = slv.solve(prob, settings.solver)
    if sol.status != slv.OPTIMAL:
        return np.inf if sol.status == slv.INFEASIBLE else np.nan
    return float(sol.theta[-1])


def _mahalanobis(pts, ref):
    mu = ref.mean(axis=0)
    cov = np.atleast_2d(np.cov(ref.T)) if len(ref) > 1 else np.eye(ref.shape[1])
    P = np.linalg.pinv(cov)
    x = pts - mu
    return np.einsum("ij,jk,ik->i", x, P, x)


def _per_point_problem(inst, s1, s2, anchor):
    s2 = s2 if s2 is not None and len(s2) else None
    if inst.objective == "l1":
        return build_l1_lp(s1, s2, inst.d, anchor)
    return build_separation_problem(s1, s2, inst.d, mode=PER_POINT, variant=inst.variant)


def solve_per_point(inst: SeparationInstance, settings: FitSettings | None = None) -> FitReport:
    """Solve with one scalar constraint per point.

    Up to ``settings.direct_limit`` points the full problem is handed to the
    solver.  Larger sets use constraint generation: solve on a working set of
    rows, add the most violated points, repeat.  Each working problem is a
    relaxation of the full one, so the first candidate that satisfies every
    point is optimal for the full problem.
    """
    settings = settings or FitSettings()
    s1, s2 = inst.s1, inst.s2
    mode = LP if inst.objective == "l1" else PER_POINT
    N1, N2 = len(s1), len(s2)
    anchor = s1.points.mean(axis=0)
    if not N2 and inst.objective != "l1":
        _check_span(s1)
    if N1 + N2 <= settings.direct_limit:
        w1, w2 = np.ones(N1, dtype=bool), np.ones(N2, dtype=bool)
    else:
        # start from the points most likely to be active
        k = settings.row_block
        w1 = np.zeros(N1, dtype=bool)
        w1[np.argsort(-_mahalanobis(s1.points, s1.points), kind="stable")[:k]] = True
        w2 = np.zeros(N2, dtype=bool)
        if N2:
            w2[np.argsort(_mahalanobis(s2.points, s1.points), kind="stable")[:k]] = True
    history, sizes = [], []
    newton = 0
    for rnd in range(settings.max_rounds):
        sizes.append((int(w1.sum()), int(w2.sum())))
        prob, par = _per_point_problem(inst, s1.subset(w1), s2.subset(w2), anchor)
        sol = slv.solve(prob, settings.solver)
        newton += sol.iterations
        if sol.status == slv.INFEASIBLE:
            return FitReport(None, np.inf, INFEASIBLE, rnd + 1, sizes, history, mode, message=sol.message)
        if sol.status != slv.OPTIMAL:
            raise FitError(f"per-point solve (round {rnd}, rows {sizes[-1]}) failed: {sol.status}: {sol.message}")
        theta = par.polynomial(sol.theta)
        objective = _objective_of(inst, par, sol.theta)
        v1 = theta(s1.points)
        v2 = theta(s2.points) if N2 else np.zeros(0)
        o1, o2 = v1 < -settings.eval_tol, v2 > settings.eval_tol
        history.append({"iteration": rnd, "objective": _num(objective), "outside": int(o1.sum() + o2.sum()), "newton": sol.iterations})
        if not (o1.any() or o2.any()):
            return FitReport(theta, objective, SEPARATED, rnd + 1, sizes, history, mode, _params_dict(par, sol.theta))
        if w1.all() and w2.all():
            # every row was in the problem; violations are solver inaccuracy
            return FitReport(theta, objective, ITERATION_LIMIT, rnd + 1, sizes, history, mode, _params_dict(par, sol.theta), "rows violated beyond eval_tol")
        for w, v, o in ((w1, v1, o1), (w2, -v2, o2)):
            idx = np.flatnonzero(o & ~w)
            w[idx[np.argsort(v[idx], kind="stable")[: settings.row_block]]] = True
    return FitReport(theta, objective, ITERATION_LIMIT, settings.max_rounds, sizes, history, mode, _params_dict(par, sol.theta), "constraint generation round limit")


def _spans(pts) -> bool:
    if len(pts) < pts.shape[1] + 1:
        return False
    x = pts - pts.mean(axis=0)
    return np.linalg.matrix_rank(x, tol=1e-10 * max(1.0, float(np.abs(pts).max())) * math.sqrt(len(pts))) == pts.shape[1]


def run_main_algorithm(inst: SeparationInstance, settings: FitSettings | None = None) -> FitReport:
    """Iterative support selection over moment relaxations.

    Starting from all points, each iteration solves the relaxation built on
    uniform measures over the current support, evaluates the candidate on
    every point, stops when nothing is misclassified and otherwise moves the
    support to the misclassified-or-boundary points (optionally keeping the
    previous support as well).
    """
    settings = settings or FitSettings()
    s1, s2 = inst.s1, inst.s2
    keep1 = np.ones(len(s1), dtype=bool)
    keep2 = np.ones(len(s2), dtype=bool)
    anchor = s1.points.mean(axis=0)
    history, sizes = [], []
    seen = set()
    theta, objective, par, z = None, np.inf, None, None
    for k in range(settings.max_outer):
        sizes.append((int(keep1.sum()), int(keep2.sum())))
        key = (np.packbits(keep1).tobytes(), np.packbits(keep2).tobytes())
        if key in seen:
            return FitReport(theta, objective, ITERATION_LIMIT, k, sizes[:-1], history, MOMENT, _params_dict(par, z), "support selection cycled")
        seen.add(key)
        m1 = uniform_measure(s1.subset(keep1))
        m2 = uniform_measure(s2.subset(keep2)) if keep2.any() else None
        prob, par = build_moment_relaxation(m1, m2, inst.r, inst.objective, inst.d, inst.variant, anchor)
        sol = slv.solve(prob, settings.solver)
        if sol.status == slv.INFEASIBLE:
            slack = _certify(inst, m1, m2, keep1, keep2, settings, sol)
            history.append({"iteration": k, "objective": None, "outside": None, "newton": sol.iterations, "feasibility_slack": _num(slack)})
            if slack > settings.infeas_tol:
                msg = f"no separating set on the current support (feasibility slack {slack:.3e})"
                return FitReport(None, np.inf, INFEASIBLE, k + 1, sizes, history, MOMENT, message=msg)
            return FitReport(None, np.inf, ITERATION_LIMIT, k + 1, sizes, history, MOMENT, message=f"relaxation infeasible but feasibility slack {slack:.3e} does not certify it")
        if sol.status != slv.OPTIMAL:
            raise FitError(f"outer iteration {k}: inner solve returned {sol.status}: {sol.message}")
        z = sol.theta
        theta = par.polynomial(z)
        objective = _objective_of(inst, par, z)
        v1 = theta(s1.points)
        v2 = theta(s2.points) if len(s2) else np.zeros(0)
        out1 = v1 < -settings.eval_tol
        out2 = v2 > settings.eval_tol
        n_out = int(out1.sum() + out2.sum())
        history.append({"iteration": k, "objective": _num(objective), "outside": n_out, "newton": sol.iterations})
        log.debug("outer %d: support %s objective %.10g outside %d", k, sizes[-1], objective, n_out)
        if inst.objective != "l1" and len(s2):
            gm = math.exp(-objective / par.m) if math.isfinite(objective) else 0.0
            if gm <= settings.zero_tol:
                slack = _certify(inst, m1, m2, keep1, keep2, settings)
                history[-1]["feasibility_slack"] = _num(slack)
                if slack > settings.infeas_tol:
                    return FitReport(theta, objective, INFEASIBLE, k + 1, sizes, history, MOMENT, _params_dict(par, z), f"optimal Q vanishes (feasibility slack {slack:.3e})")
                return FitReport(theta, objective, ITERATION_LIMIT, k + 1, sizes, history, MOMENT, _params_dict(par, z), f"optimal Q vanishes but feasibility slack {slack:.3e} does not certify infeasibility")
        if n_out == 0:
            return FitReport(theta, objective, SEPARATED, k + 1, sizes, history, MOMENT, _params_dict(par, z))
        if settings.update == EXCHANGE:
            cap = math.comb(s1.n + inst.r, inst.r)
            new1 = _exchange(v1, cap, settings.support_tol)
            new2 = _exchange(-v2, cap, settings.support_tol)
        else:
            new1 = v1 <= settings.support_tol
            new2 = v2 >= -settings.support_tol
        if settings.update == ACCUMULATE and k > 0:
            # S^0 is everything; accumulate the update sets from S^1 on
            new1 |= keep1
            new2 |= keep2
        if not _spans(s1.points[new1]):
            # a first class that does not span R^n leaves the volume unbounded
            new1 |= keep1
        keep1, keep2 = new1, new2
    return FitReport(theta, objective, ITERATION_LIMIT, settings.max_outer, sizes, history, MOMENT, _params_dict(par, z), "outer iteration limit")


def _certify(inst, m1, m2, keep1, keep2, settings, sol=None) -> float:
    """Feasibility slack backing an infeasibility verdict on the current support.

    The moment form of the feasibility problem is a relaxation, so a slack
    above ``infeas_tol`` there is already conclusive.  Otherwise, on small
    supports, the per-point form decides.  For the l1 objective the phase-I
    slack of the relaxation plays this role (negated, so positive means
    infeasible).
    """
    if inst.objective == "l1":
        return -float(sol.kkt.get("phase1_slack", 0.0)) if sol is not None else 0.0
    slack = feasibility_slack(m1, m2, inst.d, MOMENT, inst.r, settings, inst.variant)
    if slack > settings.infeas_tol or not np.isfinite(slack):
        return slack
    if keep1.sum() + keep2.sum() <= settings.direct_limit:
        s2k = inst.s2.subset(keep2) if keep2.any() else None
        slack = feasibility_slack(inst.s1.subset(keep1), s2k, inst.d, PER_POINT, None, settings, inst.variant)
    return slack


def _exchange(v, cap, tol):
    """Boundary points of a class, then its most violated points, at most
    ``cap`` in total.  ``v`` is the signed value, negative when violated."""
    bnd = np.flatnonzero(np.abs(v) <= tol)
    bnd = bnd[np.argsort(np.abs(v[bnd]), kind="stable")][:cap]
    out = np.flatnonzero(v < -tol)
    out = out[np.argsort(v[out], kind="stable")][: cap - len(bnd)]
    mask = np.zeros(v.shape[0], dtype=bool)
    mask[bnd] = True
    mask[out] = True
    return mask


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def fit(inst: SeparationInstance, mode: str = MOMENT, settings: FitSettings | None = None) -> FitReport:
    """Dispatch on the fitting mode used by the command line."""
    if mode == MOMENT:
        return run_main_algorithm(inst, settings)
    if mode == PER_POINT:
        return solve_per_point(inst, settings)
    if mode == LP:
        inst = SeparationInstance(inst.s1, inst.s2, inst.d, inst.r, "l1", inst.variant)
        return solve_per_point(inst, settings)
    raise ValueError(f"unknown mode {mode!r}")
