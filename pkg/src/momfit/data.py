"""Dataset ingestion, synthetic clusters, normalization and volume estimates."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import Polynomial
from .moments import Dataset

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - python < 3.11
    import tomli as tomllib

# Monte-Carlo samples are drawn in fixed-size blocks, one spawned seed per block
MC_BLOCK = 1 << 16


@dataclass
class Cluster:
    mean: np.ndarray
    cov: np.ndarray
    count: int
    label: int = 1


@dataclass
class ClusterSpec:
    """Mixture of independent Gaussian clusters with a seed."""

    n: int
    clusters: list = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        out = []
        for c in self.clusters:
            if not isinstance(c, Cluster):
                c = Cluster(**c)
            mean = np.asarray(c.mean, dtype=np.float64).reshape(-1)
            cov = np.asarray(c.cov, dtype=np.float64)
            if cov.ndim == 0:
                cov = float(cov) * np.eye(self.n)
            if mean.shape != (self.n,) or cov.shape != (self.n, self.n):
                raise ValueError(f"cluster shapes {mean.shape}, {cov.shape} do not match n={self.n}")
            if int(c.count) < 1:
                raise ValueError("cluster counts must be >= 1")
            if not np.allclose(cov, cov.T, atol=1e-12):
                raise ValueError("covariance must be symmetric")
            if np.linalg.eigvalsh(cov)[0] < -1e-12 * max(1.0, np.abs(cov).max()):
                raise ValueError("covariance must be positive semidefinite")
            out.append(Cluster(mean, cov, int(c.count), int(c.label)))
        self.clusters = out

    @classmethod
    def default(cls, count: int = 5000, seed: int = 0, n: int = 2) -> ClusterSpec:
        """Two isotropic clusters, sigma 0.15, means +-(0.4, ..., 0.4)."""
        cov = 0.15**2 * np.eye(n)
        return cls(n, [Cluster(np.full(n, 0.4), cov, count, 1), Cluster(np.full(n, -0.4), cov, count, 2)], seed)

    @classmethod
    def from_toml(cls, text: str) -> ClusterSpec:
        """Parse ``n``, ``seed`` and ``[[clusters]]`` tables with ``mean``,
        ``count`` and either ``cov`` (matrix) or ``sigma`` (isotropic)."""
        raw = tomllib.loads(text)
        n = int(raw["n"])
        clusters = []
        for i, c in enumerate(raw.get("clusters", [])):
            if "cov" in c:
                cov = np.asarray(c["cov"], dtype=np.float64)
            elif "sigma" in c:
                cov = float(c["sigma"]) ** 2 * np.eye(n)
            else:
                raise ValueError(f"cluster {i} needs cov or sigma")
            clusters.append(Cluster(c["mean"], cov, int(c["count"]), int(c.get("label", 1))))
        if not clusters:
            raise ValueError("spec has no clusters")
        return cls(n, clusters, int(raw.get("seed", 0)))


def _sqrt_psd(cov):
    # Cholesky fails on singular covariances; fall back to the eigen root
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        w, V = np.linalg.eigh(cov)
        return V * np.sqrt(np.clip(w, 0.0, None))


def generate_labeled(spec: ClusterSpec):
    """Points and integer labels, clusters in order."""
    rng = np.random.default_rng(spec.seed)
    pts, labels = [], []
    for c in spec.clusters:
        z = rng.standard_normal((c.count, spec.n))
        pts.append(c.mean + z @ _sqrt_psd(c.cov).T)
        labels.append(np.full(c.count, c.label))
    return np.vstack(pts), np.concatenate(labels)


def generate_clusters(spec: ClusterSpec) -> Dataset:
    return Dataset(generate_labeled(spec)[0])


@dataclass(frozen=True)
class AffineMap:
    """``x -> (x - shift) / scale``."""

    shift: np.ndarray
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        object.__setattr__(self, "shift", np.asarray(self.shift, dtype=np.float64))

    def apply(self, pts) -> np.ndarray:
        return (np.asarray(pts, dtype=np.float64) - self.shift) / self.scale

    def invert(self, pts) -> np.ndarray:
        return np.asarray(pts, dtype=np.float64) * self.scale + self.shift

    def to_json(self) -> dict:
        return {"shift": self.shift.tolist(), "scale": self.scale}


def normalize_to_unit_ball(s: Dataset):
    """Center at the mean, then scale so the farthest point has norm one."""
    if len(s) == 0:
        raise ValueError("cannot normalize an empty dataset")
    shift = s.points.mean(axis=0)
    radius = float(np.linalg.norm(s.points - shift, axis=1).max())
    amap = AffineMap(shift, radius if radius > 0 else 1.0)
    out = amap.apply(s.points)
    # exact unit norm for the farthest point despite rounding in the division
    if radius > 0:
        k = int(np.argmax(np.linalg.norm(out, axis=1)))
        out[k] /= np.linalg.norm(out[k])
    return Dataset(out), amap


def make_separable(s1: Dataset, s2: Dataset, d: int = 2, settings=None) -> Dataset:
    """Points of ``s2`` strictly outside the minimum-volume covering set of ``s1``."""
    from . import fitting

    inst = fitting.SeparationInstance(s1, None, d)
    rep = fitting.solve_per_point(inst, settings)
    if rep.theta is None:
        raise fitting.FitError(f"covering problem failed: {rep.status}")
    return s2.subset(rep.theta(s2.points) < 0)


def monte_carlo_volume(theta: Polynomial, box, samples: int = 1_000_000, seed: int = 0):
    """Volume of ``{theta >= 0}`` inside ``box = (lo, hi)`` by uniform sampling.

    Samples come in blocks of ``MC_BLOCK`` drawn from seeds spawned off
    ``seed``, so the estimate does not depend on how blocks are scheduled.
    Returns ``(volume, stderr)``.
    """
    lo, hi = (np.asarray(b, dtype=np.float64).reshape(-1) for b in box)
    if lo.shape != (theta.n,) or hi.shape != (theta.n,) or np.any(hi <= lo):
        raise ValueError("box must be a pair of n-vectors with lo < hi")
    if samples < 1:
        raise ValueError("samples must be positive")
    box_vol = float(np.prod(hi - lo))
    nblocks = -(-samples // MC_BLOCK)
    seeds = np.random.SeedSequence(seed).spawn(nblocks)
    hits = 0
    for b, ss in enumerate(seeds):
        m = min(MC_BLOCK, samples - b * MC_BLOCK)
        u = np.random.default_rng(ss).random((m, theta.n))
        hits += int(np.count_nonzero(theta(lo + u * (hi - lo)) >= 0))
    p = hits / samples
    return p * box_vol, math.sqrt(p * (1 - p) / samples) * box_vol


def volume_report(theta: Polynomial, box, samples: int = 1_000_000, seed: int = 0) -> dict:
    vol, err = monte_carlo_volume(theta, box, samples, seed)
    return {"volume": vol, "stderr": err, "samples": int(samples), "seed": int(seed)}


def bounding_box(pts, pad: float = 0.1):
    pts = np.asarray(pts, dtype=np.float64)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    return lo - pad * span, hi + pad * span


# --- files --------------------------------------------------------------------


def _is_number(tok: str) -> bool:
    try:
        float(tok)
    except ValueError:
        return False
    return True


def load_csv(path, labels: bool = False):
    """Read comma-separated coordinates, one point per row.

    A first row that is not numeric is taken as a header.  With ``labels``
    the last column holds the class (1 or 2) and a pair ``(S1, S2)`` is
    returned; otherwise a single :class:`Dataset`.
    """
    rows, labs = [], []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            row = [tok.strip() for tok in row]
            if not row or all(tok == "" for tok in row) or row[0].startswith("#"):
                continue
            if lineno == 1 and not all(_is_number(tok) for tok in row):
                continue
            vals = []
            for col, tok in enumerate(row, start=1):
                try:
                    vals.append(float(tok))
                except ValueError:
                    raise ValueError(f"{path}: line {lineno}, column {col}: not a number: {tok!r}") from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ValueError(f"{path}: line {lineno}: expected {width} fields, got {len(vals)}")
            if labels:
                lab = vals.pop()
                if lab not in (1.0, 2.0):
                    raise ValueError(f"{path}: line {lineno}: label must be 1 or 2, got {lab:g}")
                labs.append(int(lab))
            rows.append(vals)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    n = len(rows[0])
    if n == 0:
        raise ValueError(f"{path}: rows have no coordinates")
    pts = np.array(rows, dtype=np.float64).reshape(-1, n)
    if not labels:
        return Dataset(pts)
    labs = np.array(labs)
    return Dataset(pts[labs == 1]), Dataset(pts[labs == 2])


def save_csv(path, pts, labels=None, header: bool = False):
    """Write one point per row, shortest round-trip float formatting."""
    pts = np.asarray(pts, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if header:
            w.writerow([f"x{i + 1}" for i in range(pts.shape[1])] + (["label"] if labels is not None else []))
        for i, p in enumerate(pts):
            row = [repr(float(v)) for v in p]
            if labels is not None:
                row.append(str(int(labels[i])))
            w.writerow(row)


def save_model_json(report, path):
    Path(path).write_text(json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n")


def load_model_json(path):
    from .fitting import FitReport

    return FitReport.from_json(json.loads(Path(path).read_text()))
