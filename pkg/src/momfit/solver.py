"""Feasible-start barrier method for determinant-maximization problems.

Problems have the form::

    minimize    c'z - w * logdet G(z)
    subject to  F_j(z) = A0_j + sum_k z_k A_jk  >= 0   (PSD, every block j)
                g_i'z + h_i >= 0                      (scalar blocks)
                lower <= z <= upper

The central path of ``t * f0(z) - sum_j logdet F_j(z)`` is followed with
damped Newton steps and backtracking; block positivity along the line search
is tested by attempting a Cholesky factorization.  A phase-I max-margin
problem supplies the strictly feasible start or an infeasibility certificate.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.linalg import solve_triangular

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
MAX_ITERS = "MaxIters"
NUMERICAL_FAILURE = "NumericalFailure"


class SolverError(RuntimeError):
    """Raised by :func:`solve` callers that want failures as exceptions."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


@dataclass(frozen=True, eq=False)
class AffineLmiBlock:
    """``A0 + sum_k z_k A[k]``, all matrices symmetric of the same size."""

    A0: np.ndarray
    A: np.ndarray
    name: str = ""

    def __post_init__(self):
        A0 = np.array(self.A0, dtype=np.float64)
        A = np.array(self.A, dtype=np.float64)
        if A0.ndim != 2 or A0.shape[0] != A0.shape[1]:
            raise ValueError("A0 must be square")
        if A.ndim != 3 or A.shape[1:] != A0.shape:
            raise ValueError(f"A must have shape (nvars, {A0.shape[0]}, {A0.shape[0]})")
        scale = max(1.0, float(np.abs(A0).max(initial=0.0)), float(np.abs(A).max(initial=0.0)))
        if np.abs(A0 - A0.T).max(initial=0.0) > 1e-12 * scale or np.abs(A - A.transpose(0, 2, 1)).max(initial=0.0) > 1e-12 * scale:
            raise ValueError(f"block {self.name!r} is not symmetric")
        A0.setflags(write=False)
        A.setflags(write=False)
        object.__setattr__(self, "A0", A0)
        object.__setattr__(self, "A", A)

    @property
    def size(self) -> int:
        return self.A0.shape[0]

    @property
    def nvars(self) -> int:
        return self.A.shape[0]

    def value(self, z) -> np.ndarray:
        return self.A0 + np.tensordot(np.asarray(z, dtype=np.float64), self.A, axes=1)

    def scaled(self, a: float) -> AffineLmiBlock:
        return AffineLmiBlock(a * self.A0, a * self.A, self.name)

    @classmethod
    def scalar(cls, g, h: float, name: str = "") -> AffineLmiBlock:
        """The 1x1 block ``g'z + h``."""
        g = np.asarray(g, dtype=np.float64)
        return cls(np.array([[h]]), g.reshape(-1, 1, 1), name)


@dataclass(frozen=True, eq=False)
class ScalarBlocks:
    """A batch of 1x1 blocks ``G z + h >= 0`` stored as rows (linear inequalities)."""

    G: np.ndarray
    h: np.ndarray
    name: str = ""

    def __post_init__(self):
        G = np.array(self.G, dtype=np.float64)
        if G.ndim == 1:
            G = G.reshape(1, -1)
        h = np.array(self.h, dtype=np.float64).ravel()
        if G.shape[0] != h.shape[0]:
            raise ValueError("G and h disagree on the number of rows")
        G.setflags(write=False)
        h.setflags(write=False)
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "h", h)

    @property
    def size(self) -> int:
        return self.G.shape[0]

    @property
    def nvars(self) -> int:
        return self.G.shape[1]

    def value(self, z) -> np.ndarray:
        return self.G @ np.asarray(z, dtype=np.float64) + self.h

    def scaled(self, a: float) -> ScalarBlocks:
        return ScalarBlocks(a * self.G, a * self.h, self.name)


@dataclass(frozen=True, eq=False)
class MaxDetProblem:
    nvars: int
    c: np.ndarray
    constraints: tuple = ()
    detblock: AffineLmiBlock | None = None
    w: float = 1.0
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    names: tuple = ()

    def __post_init__(self):
        c = np.array(self.c, dtype=np.float64).ravel()
        if c.shape[0] != self.nvars:
            raise ValueError(f"cost has length {c.shape[0]}, expected {self.nvars}")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "constraints", tuple(self.constraints))
        for blk in self.constraints + ((self.detblock,) if self.detblock is not None else ()):
            if blk.nvars != self.nvars:
                raise ValueError(f"block {blk.name!r} has {blk.nvars} variables, expected {self.nvars}")
        if self.detblock is not None and not self.w > 0:
            raise ValueError("logdet weight must be positive")
        for attr in ("lower", "upper"):
            v = getattr(self, attr)
            if v is not None:
                v = np.broadcast_to(np.asarray(v, dtype=np.float64), (self.nvars,)).copy()
                object.__setattr__(self, attr, v)

    def objective(self, z) -> float:
        z = np.asarray(z, dtype=np.float64)
        val = float(self.c @ z)
        if self.detblock is not None:
            sign, ld = np.linalg.slogdet(self.detblock.value(z))
            val -= self.w * (ld if sign > 0 else -np.inf)
        return val

    def box_blocks(self) -> list:
        """Finite box bounds as scalar blocks."""
        out = []
        eye = np.eye(self.nvars)
        if self.lower is not None:
            k = np.flatnonzero(np.isfinite(self.lower))
            if k.size:
                out.append(ScalarBlocks(eye[k], -self.lower[k], "lower"))
        if self.upper is not None:
            k = np.flatnonzero(np.isfinite(self.upper))
            if k.size:
                out.append(ScalarBlocks(-eye[k], self.upper[k], "upper"))
        return out

    def all_constraints(self) -> list:
        return list(self.constraints) + self.box_blocks()

    def total_size(self) -> int:
        return sum(b.size for b in self.all_constraints())

    def margin(self, z) -> float:
        """Smallest eigenvalue over all constraint blocks at ``z``."""
        return _margin(self.all_constraints(), np.asarray(z, dtype=np.float64))

    def scaled(self, a: float) -> MaxDetProblem:
        """Same problem with every constraint block multiplied by ``a``."""
        return MaxDetProblem(
            self.nvars, self.c, tuple(b.scaled(a) for b in self.constraints), self.detblock, self.w, self.lower, self.upper, self.names
        )


@dataclass
class Settings:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-9
    max_newton: int = 200
    t_growth: float = 10.0
    t0: float = 1.0
    w: float | None = None
    armijo: float = 0.01
    shrink: float = 0.5
    # Newton decrement^2 / 2 at which a centering step stops
    center_tol: float = 1e-6
    # tighter decrement target for the last centering
    polish_tol: float = 1e-24
    reg0: float = 1e-12
    reg_max: float = 1e-4
    phase1_cap: float = 10.0
    phase1_radius: float = 1e6
    # extrapolate along the central path tangent when t grows
    predictor: bool = True
    diverge_norm: float = 1e12

    @classmethod
    def from_text(cls, text: str) -> Settings:
        """Parse ``key = value`` lines (a TOML subset); unknown keys are errors."""
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        data = tomllib.loads(text)
        data = data.get("solver", data)
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, val in data.items():
            if key not in known:
                raise ValueError(f"unknown solver setting {key!r}")
            kind = type(known[key].default)
            if kind is bool:
                if not isinstance(val, bool):
                    raise ValueError(f"solver setting {key!r} must be true or false")
                kwargs[key] = val
            else:
                kwargs[key] = int(val) if kind is int else float(val)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> Settings:
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())


@dataclass
class Solution:
    status: str
    theta: np.ndarray
    objective: float
    margin: float
    iterations: int
    kkt: dict = field(default_factory=dict)
    t: float = float("nan")
    gap: float = float("inf")
    history: list = field(default_factory=list)
    message: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OPTIMAL

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "theta": [float(v) for v in self.theta],
            "objective": _jsonable(self.objective),
            "margin": _jsonable(self.margin),
            "iterations": int(self.iterations),
            "gap": _jsonable(self.gap),
            "kkt": {k: _jsonable(v) for k, v in self.kkt.items()},
            "message": self.message,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def _jsonable(v):
    v = float(v)
    return v if math.isfinite(v) else repr(v)


# --- block evaluation ---------------------------------------------------------


class _Lmi:
    """Cached flattened view of an LMI block for barrier derivatives."""

    def __init__(self, A0, A, extra=None):
        m = A0.shape[0]
        if extra is not None:
            A = np.concatenate([A, extra[None]], axis=0)
        self.m = m
        self.A0 = A0
        self.A = A
        self.Aflat = A.reshape(A.shape[0], m * m)

    def value(self, z):
        return self.A0 + (z @ self.Aflat).reshape(self.m, self.m)

    def chol(self, z):
        try:
            return np.linalg.cholesky(self.value(z))
        except np.linalg.LinAlgError:
            return None

    def derivs(self, L, weight):
        """Gradient and Hessian of ``-weight * logdet F`` given ``F = L L'``."""
        m, nv = self.m, self.A.shape[0]
        Y = solve_triangular(L, self.A.transpose(1, 0, 2).reshape(m, nv * m), lower=True, check_finite=False)
        YT = Y.reshape(m, nv, m).transpose(2, 1, 0).reshape(m, nv * m)
        B = solve_triangular(L, YT, lower=True, check_finite=False).reshape(m, nv, m)
        Bflat = B.transpose(1, 0, 2).reshape(nv, m * m)
        grad = -weight * np.trace(B, axis1=0, axis2=2)
        hess = weight * (Bflat @ Bflat.T)
        return grad, hess


class _Barrier:
    """``t * (c'z - w logdet G(z)) - sum logdet F_j(z) - sum log(Gz + h)``."""

    def __init__(self, c, lmis, scalar_G, scalar_h, det=None, w=1.0):
        self.c = c
        self.lmis = lmis
        self.G = scalar_G
        self.h = scalar_h
        self.det = det
        self.w = w

    def factor(self, z):
        """Cholesky factors of every block, or None if ``z`` is not interior."""
        s = self.G @ z + self.h if self.G is not None else None
        if s is not None and not np.all(s > 0):
            return None
        Ls = []
        for blk in self.lmis:
            L = blk.chol(z)
            if L is None:
                return None
            Ls.append(L)
        Ld = None
        if self.det is not None:
            Ld = self.det.chol(z)
            if Ld is None:
                return None
        return s, Ls, Ld

    def value(self, z, t, fac):
        s, Ls, Ld = fac
        v = t * float(self.c @ z)
        if Ld is not None:
            v -= t * self.w * 2.0 * np.sum(np.log(np.diag(Ld)))
        for L in Ls:
            v -= 2.0 * np.sum(np.log(np.diag(L)))
        if s is not None:
            v -= np.sum(np.log(s))
        return v

    def derivs(self, z, t, fac):
        s, Ls, Ld = fac
        nv = z.shape[0]
        g = t * self.c.copy()
        H = np.zeros((nv, nv))
        if Ld is not None:
            gd, Hd = self.det.derivs(Ld, t * self.w)
            g += gd
            H += Hd
        for blk, L in zip(self.lmis, Ls):
            gb, Hb = blk.derivs(L, 1.0)
            g += gb
            H += Hb
        if s is not None:
            Gs = self.G / s[:, None]
            g -= Gs.sum(axis=0)
            H += Gs.T @ Gs
        return g, H

    def f0_grad(self, z, fac):
        g = self.c.copy()
        if fac[2] is not None:
            g += self.det.derivs(fac[2], self.w)[0]
        return g

    def max_step(self, z, dz):
        """Largest step keeping the scalar blocks positive (inf if unbounded)."""
        if self.G is None:
            return np.inf
        s = self.G @ z + self.h
        ds = self.G @ dz
        neg = ds < 0
        if not np.any(neg):
            return np.inf
        return float(np.min(-s[neg] / ds[neg]))


def _newton_direction(g, H, settings):
    d = np.sqrt(np.maximum(np.diag(H), 0.0))
    d[d == 0] = 1.0
    Hs = H / np.outer(d, d)
    gs = g / d
    reg = settings.reg0
    eye = np.eye(H.shape[0])
    while reg <= settings.reg_max:
        try:
            L = np.linalg.cholesky(Hs + reg * eye)
        except np.linalg.LinAlgError:
            reg *= 10.0
            continue
        y = solve_triangular(L, -gs, lower=True, check_finite=False)
        return solve_triangular(L.T, y, lower=False, check_finite=False) / d
    return None


def _split_blocks(blocks, nvars, shift=False):
    """Separate dense LMI blocks from scalar rows.

    With ``shift`` each block gets an extra trailing variable ``s`` entering
    as ``-s * I`` (phase I).
    """
    lmis, Gs, hs = [], [], []
    for blk in blocks:
        if isinstance(blk, ScalarBlocks) or (isinstance(blk, AffineLmiBlock) and blk.size == 1):
            if isinstance(blk, ScalarBlocks):
                G, h = blk.G, blk.h
            else:
                G, h = blk.A[:, 0, 0].reshape(1, -1), blk.A0[0].copy()
            if shift:
                G = np.hstack([G, -np.ones((G.shape[0], 1))])
            Gs.append(G)
            hs.append(h)
        else:
            extra = -np.eye(blk.size) if shift else None
            lmis.append(_Lmi(blk.A0, blk.A, extra))
    G = np.vstack(Gs) if Gs else None
    h = np.concatenate(hs) if hs else None
    return lmis, G, h


def _margin(blocks, z):
    out = np.inf
    for blk in blocks:
        if isinstance(blk, ScalarBlocks):
            if blk.size:
                out = min(out, float(np.min(blk.value(z))))
        else:
            out = min(out, float(np.linalg.eigvalsh(blk.value(z))[0]))
    return out


# extra Newton steps spent driving the final decrement below center_tol
MAX_POLISH = 8
# smallest increase of t tried after a centering runs out of steps
MIN_GROWTH = 1.1
# the first centering starts from an arbitrary point, so its cost follows the
# initial suboptimality rather than the increase of t; it gets this many
# times the per-centering step budget
FIRST_CENTERING_FACTOR = 5


def _path_following(bar, z0, size, settings, t0=None, stop=None):
    """Follow the central path from the strictly feasible ``z0``.

    Returns ``(status, z, t, newton_steps, history, message)`` where history
    holds ``(t, c'z - w logdet G)`` after each centering.
    """
    z = z0.copy()
    t = settings.t0 if t0 is None else t0
    fac = bar.factor(z)
    if fac is None:
        return NUMERICAL_FAILURE, z, t, 0, [], "starting point is not strictly feasible"
    steps = 0
    stalls = 0
    history = []
    center = None
    while True:
        final = size / t <= settings.gap_tol or size == 0
        tol = settings.polish_tol if final else settings.center_tol
        prev = np.inf
        polish = flat = inner = 0
        retry = False
        # centering
        while True:
            g, H = bar.derivs(z, t, fac)
            dz = _newton_direction(g, H, settings)
            if dz is None:
                return NUMERICAL_FAILURE, z, t, steps, history, "Newton system indefinite after regularization"
            lam2 = float(-g @ dz)
            if lam2 / 2.0 <= tol:
                break
            if lam2 / 2.0 <= settings.center_tol:
                # roundoff floor: the decrement stopped shrinking quadratically
                if lam2 > 0.25 * prev or polish >= MAX_POLISH:
                    break
                polish += 1
            # far along the path slacks are tiny and the decrement can stall
            # above center_tol at the roundoff level
            flat = flat + 1 if lam2 < 1e-3 and lam2 > 0.9 * prev else 0
            if flat >= 3:
                break
            prev = lam2
            # the step budget applies to each centering
            if inner >= (settings.max_newton if center is not None else FIRST_CENTERING_FACTOR * settings.max_newton):
                if center is None or t / center[2] < MIN_GROWTH:
                    return MAX_ITERS, z, t, steps, history, f"Newton step limit {settings.max_newton} reached at t={t:g}"
                # the path bends too sharply for this increase of t; retry
                # from the last center with a smaller one
                z, fac, tc, Hc = center
                t_next = tc * math.sqrt(t / tc)
                if settings.predictor:
                    z, fac = _predict(bar, z, fac, Hc, tc, t_next, settings)
                t = t_next
                retry = True
                break
            steps += 1
            inner += 1
            alpha = min(1.0, 0.99 * bar.max_step(z, dz))
            fz = bar.value(z, t, fac)
            slope = float(g @ dz)
            accepted = False
            while alpha >= 1e-14:
                zn = z + alpha * dz
                fn = bar.factor(zn)
                if fn is not None:
                    # near the center the Armijo test is below roundoff; only
                    # positivity is enforced there
                    if lam2 < 1e-6 or bar.value(zn, t, fn) <= fz + settings.armijo * alpha * slope:
                        accepted = True
                        break
                alpha *= settings.shrink
            if not accepted:
                stalls += 1
                if stalls >= 5:
                    return NUMERICAL_FAILURE, z, t, steps, history, "line search stalled"
                break
            stalls = 0
            if np.array_equal(zn, z):
                break
            z, fac = zn, fn
            if not np.all(np.isfinite(z)) or np.abs(z).max() > settings.diverge_norm:
                return NUMERICAL_FAILURE, z, t, steps, history, "iterates diverge; problem may be unbounded"
        if retry:
            continue
        history.append((t, _f0(bar, z, fac)))
        center = (z, fac, t, H)
        if stop is not None and stop(z, t):
            return OPTIMAL, z, t, steps, history, "stopped early"
        if final:
            return OPTIMAL, z, t, steps, history, ""
        t_next = t * settings.t_growth
        if settings.predictor:
            z, fac = _predict(bar, z, fac, H, t, t_next, settings)
        t = t_next


def _predict(bar, z, fac, H, t, t_next, settings):
    """Tangent step along the central path from ``t`` to ``t_next``.

    On the path ``t grad f0 + grad phi = 0``, so ``dz/dt = -H^{-1} grad f0``
    with ``H`` the Hessian of ``F_t`` at the center.  The step length follows
    a ``1 / t`` model of the path and is halved back until the point is
    interior and lowers ``F_{t_next}``.
    """
    g0 = bar.f0_grad(z, fac)
    dz = _newton_direction(g0, H, settings)
    if dz is None:
        return z, fac
    f_old = bar.value(z, t_next, fac)
    # the path behaves like z* + a / t, so extrapolate in 1 / t
    beta = t * (1.0 - t / t_next)
    for _ in range(20):
        zn = z + beta * dz
        fn = bar.factor(zn)
        if fn is not None and bar.value(zn, t_next, fn) < f_old:
            return zn, fn
        beta *= 0.5
    return z, fac


def _f0(bar, z, fac):
    v = float(bar.c @ z)
    if fac[2] is not None:
        v -= bar.w * 2.0 * float(np.sum(np.log(np.diag(fac[2]))))
    return v


# --- public entry points ------------------------------------------------------


def phase1(p: MaxDetProblem, settings: Settings | None = None, z0=None, early: bool = False):
    """Max-margin problem ``max s`` s.t. every block ``>= s I``.

    The determinant block, when present, is included so the returned point
    also lies in the domain of the logdet.  ``s`` is capped at
    ``settings.phase1_cap`` and each variable is bounded by
    ``settings.phase1_radius`` to keep the central path bounded.  With
    ``early`` the path stops once the slack is certified positive and within
    a factor two of its optimum, which is all :func:`solve` needs.  Returns
    ``(theta0, slack, info)``; slack is ``+inf`` when there is nothing to
    satisfy.
    """
    settings = settings or Settings()
    nv = p.nvars
    blocks = p.all_constraints()
    if p.detblock is not None:
        blocks = blocks + [p.detblock]
    z = np.zeros(nv) if z0 is None else np.asarray(z0, dtype=np.float64).copy()
    if not blocks:
        return z, np.inf, {"iterations": 0, "status": OPTIMAL}
    start_margin = _margin(blocks, z)
    R = settings.phase1_radius
    eye = np.eye(nv)
    bound = ScalarBlocks(np.vstack([eye, -eye]), np.full(2 * nv, R), "norm")
    lmis, G, h = _split_blocks(blocks, nv, shift=True)
    cap = settings.phase1_cap
    s0 = min(start_margin, cap) - 1.0
    Gb = np.hstack([bound.G, np.zeros((2 * nv, 1))])
    Gcap = np.zeros((1, nv + 1))
    Gcap[0, -1] = -1.0
    G = np.vstack([g for g in (G, Gb, Gcap) if g is not None])
    h = np.concatenate([x for x in (h, bound.h, np.array([cap])) if x is not None])
    c = np.zeros(nv + 1)
    c[-1] = -1.0
    bar = _Barrier(c, lmis, G, h)
    size = sum(b.size for b in blocks) + 2 * nv + 1
    zs = np.concatenate([z, [s0]])

    def certified(zz, t):
        # s(t) + size/t bounds the optimal slack from above
        if zz[-1] + size / t < -settings.feas_tol:
            return True
        return early and zz[-1] > settings.feas_tol and zz[-1] >= size / t

    status, zs, t, steps, _, msg = _path_following(bar, zs, size, settings, stop=certified)
    info = {"iterations": steps, "status": status, "message": msg}
    if status == NUMERICAL_FAILURE:
        return zs[:-1], float(zs[-1]), info
    return zs[:-1], float(zs[-1]), info


def solve(p: MaxDetProblem, settings: Settings | None = None, z0=None) -> Solution:
    """Solve ``p`` by phase I followed by the barrier path."""
    settings = settings or Settings()
    w = settings.w if settings.w is not None else p.w
    blocks = p.all_constraints()
    if z0 is not None and _strictly_feasible(p, z0, settings):
        z_start = np.asarray(z0, dtype=np.float64).copy()
        p1_steps = 0
    else:
        z_start, slack, info = phase1(p, settings, z0, early=True)
        p1_steps = info["iterations"]
        if info["status"] in (NUMERICAL_FAILURE, MAX_ITERS) and not slack > settings.feas_tol:
            return Solution(info["status"], z_start, np.nan, p.margin(z_start) if blocks else np.inf, p1_steps, message="phase I: " + info["message"])
        if not slack > settings.feas_tol:
            return Solution(
                INFEASIBLE,
                z_start,
                np.nan,
                slack,
                p1_steps,
                kkt={"phase1_slack": slack},
                message=f"no strictly feasible point (phase I slack {slack:.3e})",
            )
    lmis, G, h = _split_blocks(blocks, p.nvars)
    det = _Lmi(p.detblock.A0, p.detblock.A) if p.detblock is not None else None
    bar = _Barrier(p.c, lmis, G, h, det, w)
    size = sum(b.size for b in blocks)
    status, z, t, steps, history, msg = _path_following(bar, z_start, size, settings)
    fac = bar.factor(z)
    objective = _f0(bar, z, fac) if fac is not None else np.nan
    sol = Solution(
        status,
        z,
        objective,
        p.margin(z) if blocks else np.inf,
        steps + p1_steps,
        t=t,
        gap=size / t if size else 0.0,
        history=history,
        message=msg,
    )
    if status == OPTIMAL:
        sol.kkt = kkt_residuals(p, sol, settings)
    return sol


def _strictly_feasible(p, z, settings):
    z = np.asarray(z, dtype=np.float64)
    if p.detblock is not None and np.linalg.eigvalsh(p.detblock.value(z))[0] <= 0:
        return False
    return p.margin(z) > settings.feas_tol


# eigenvalues (or slacks) below ACTIVE_TOL * max(1, scale) mark the active face
ACTIVE_TOL = 1e-6


def kkt_residuals(p: MaxDetProblem, s: Solution, settings: Settings | None = None) -> dict:
    """Residuals of the optimality conditions using barrier dual estimates.

    The barrier estimate is ``Z_j = F_j(z)^{-1} / t``.  On the active face
    (eigenvalues of ``F_j`` near zero) that inverse amplifies the rounding
    error of ``F_j`` by ``1 / lambda_min``, so there the multipliers
    ``Z_j = U S_j U'`` are refit by least squares, starting from the barrier
    values, with ``U`` the well-conditioned eigenvectors of the face.
    Stationarity is the infinity norm of ``grad f0 - sum_j <Z_j, A_jk>``;
    ``dual_min_eig`` is the smallest eigenvalue over the ``Z_j``.
    """
    settings = settings or Settings()
    w = settings.w if settings.w is not None else p.w
    z = np.asarray(s.theta, dtype=np.float64)
    t = s.t
    nv = p.nvars
    grad = p.c.copy()
    if p.detblock is not None:
        Ginv = np.linalg.inv(p.detblock.value(z))
        grad -= w * np.einsum("ij,kji->k", Ginv, p.detblock.A)
    fixed = np.zeros(nv)
    cols, s0, kinds = [], [], []
    comp, min_eig = [], np.inf
    for blk in p.all_constraints():
        if isinstance(blk, ScalarBlocks):
            v = blk.value(z)
            if not v.size:
                continue
            min_eig = min(min_eig, float(v.min()))
            act = v <= ACTIVE_TOL * np.maximum(1.0, np.abs(blk.h))
            fixed += blk.G[~act].T @ (1.0 / (t * v[~act]))
            comp.append(float(np.max(1.0 / t, initial=0.0)))
            for i in np.flatnonzero(act):
                cols.append(blk.G[i])
                s0.append(1.0 / (t * v[i]))
                kinds.append(("row", None, None))
        else:
            F = blk.value(z)
            mu, V = np.linalg.eigh(F)
            min_eig = min(min_eig, float(mu[0]))
            act = mu <= ACTIVE_TOL * max(1.0, float(mu[-1]))
            Vi = V[:, ~act]
            Zi = (Vi / (t * mu[~act])) @ Vi.T
            fixed += np.einsum("ij,kji->k", Zi, blk.A)
            U = V[:, act]
            k = U.shape[1]
            # A projected on the face, one column per upper-triangle entry of S
            B = np.einsum("ia,kij,jb->kab", U, blk.A, U)
            S0 = np.diag(1.0 / (t * mu[act]))
            for a_ in range(k):
                for b_ in range(a_, k):
                    cols.append(B[:, a_, b_] * (1.0 if a_ == b_ else 2.0))
                    s0.append(S0[a_, b_])
                    kinds.append(("face", id(blk), (a_, b_, k)))
            comp.append(float(np.sum(Zi * F)) + float(np.sum(mu[act] / (t * mu[act]))))
    r = grad - fixed
    svec = np.array(s0)
    if cols:
        M = np.array(cols).T
        delta = np.linalg.lstsq(M, r - M @ svec, rcond=None)[0]
        svec = svec + delta
        r = r - M @ svec
    # smallest dual eigenvalue: active rows and refit face matrices
    dual_min = np.inf
    faces = {}
    for val, (kind, key, pos) in zip(svec, kinds):
        if kind == "row":
            dual_min = min(dual_min, float(val))
        else:
            a_, b_, k = pos
            S = faces.setdefault(key, np.zeros((k, k)))
            S[a_, b_] = S[b_, a_] = val
    for S in faces.values():
        dual_min = min(dual_min, float(np.linalg.eigvalsh(S)[0]))
    return {
        "stationarity": float(np.abs(r).max(initial=0.0)),
        "complementarity": max(comp, default=0.0),
        "min_eig": min_eig,
        "dual_min_eig": dual_min if np.isfinite(dual_min) else 0.0,
        "gap": p.total_size() / t,
    }


def neg_logdet_grad(X) -> np.ndarray:
    """Gradient of ``-logdet X`` with respect to the entries of ``X``."""
    return -np.linalg.inv(np.asarray(X, dtype=np.float64)).T


def settings_to_text(settings: Settings) -> str:
    def fmt(v):
        return ("true" if v else "false") if isinstance(v, bool) else repr(v)

    return "".join(f"{k} = {fmt(v)}\n" for k, v in asdict(settings).items() if v is not None)

