import json
import math

import numpy as np
import pytest

from momfit import data as D
from momfit import fitting as F
from momfit.basis import Polynomial
from momfit.moments import Dataset

DISK = Polynomial.from_terms(2, 2, {(0, 0): 1.0, (2, 0): -1.0, (0, 2): -1.0})

SPEC_TOML = """
n = 2
seed = 7

[[clusters]]
mean = [0.5, 0.0]
sigma = 0.1
count = 30
label = 1

[[clusters]]
mean = [-0.5, 0.0]
cov = [[0.02, 0.0], [0.0, 0.01]]
count = 20
label = 2
"""


def write(tmp_path, text, name="pts.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_csv_basic(tmp_path):
    s = D.load_csv(write(tmp_path, "1,2\n3,4\n5,6\n"))
    assert s.n == 2 and len(s) == 3
    assert s.points[2].tolist() == [5.0, 6.0]


def test_csv_header_comments_blank(tmp_path):
    s = D.load_csv(write(tmp_path, "x1,x2\n# note\n1,2\n\n3, 4\n"))
    assert s.points.tolist() == [[1.0, 2.0], [3.0, 4.0]]


def test_csv_labels(tmp_path):
    s1, s2 = D.load_csv(write(tmp_path, "0,0,1\n1,1,2\n2,2,1\n"), labels=True)
    assert s1.points.tolist() == [[0.0, 0.0], [2.0, 2.0]]
    assert s2.points.tolist() == [[1.0, 1.0]]
    with pytest.raises(ValueError, match="label"):
        D.load_csv(write(tmp_path, "0,0,3\n", "bad.csv"), labels=True)


def test_csv_error_cites_line(tmp_path):
    rows = ["1,2"] * 6 + ["1,abc"]
    with pytest.raises(ValueError, match="line 7, column 2"):
        D.load_csv(write(tmp_path, "\n".join(rows) + "\n"))


def test_csv_ragged_and_empty(tmp_path):
    with pytest.raises(ValueError, match="line 2"):
        D.load_csv(write(tmp_path, "1,2\n1,2,3\n"))
    with pytest.raises(ValueError, match="no data"):
        D.load_csv(write(tmp_path, "x,y\n", "empty.csv"))


def test_csv_round_trip(tmp_path, rng):
    pts = rng.standard_normal((20, 3))
    labels = rng.integers(1, 3, 20)
    path = tmp_path / "out.csv"
    D.save_csv(path, pts, labels, header=True)
    assert path.read_text().splitlines()[0] == "x1,x2,x3,label"
    s1, s2 = D.load_csv(path, labels=True)
    np.testing.assert_array_equal(s1.points, pts[labels == 1])
    np.testing.assert_array_equal(s2.points, pts[labels == 2])


def test_spec_from_toml():
    spec = D.ClusterSpec.from_toml(SPEC_TOML)
    assert spec.n == 2 and spec.seed == 7
    np.testing.assert_allclose(spec.clusters[0].cov, 0.01 * np.eye(2))
    pts, lab = D.generate_labeled(spec)
    assert pts.shape == (50, 2) and (lab == 2).sum() == 20
    with pytest.raises(ValueError):
        D.ClusterSpec.from_toml("n = 2\n[[clusters]]\nmean = [0, 0]\ncount = 3\n")


def test_generation_examples():
    s = D.generate_clusters(D.ClusterSpec(2, [dict(mean=[1.0, 2.0], cov=0.0, count=100)]))
    assert len(s) == 100 and np.all(s.points == [1.0, 2.0])
    assert len(D.generate_clusters(D.ClusterSpec.default(5000, 1))) == 10_000
    a = D.generate_clusters(D.ClusterSpec.default(50, 3))
    b = D.generate_clusters(D.ClusterSpec.default(50, 3))
    np.testing.assert_array_equal(a.points, b.points)


def test_spec_validation():
    with pytest.raises(ValueError, match="positive semidefinite"):
        D.ClusterSpec(2, [dict(mean=[0, 0], cov=[[1.0, 0.0], [0.0, -1.0]], count=5)])
    with pytest.raises(ValueError):
        D.ClusterSpec(2, [dict(mean=[0, 0, 0], cov=1.0, count=5)])
    with pytest.raises(ValueError):
        D.ClusterSpec(2, [dict(mean=[0, 0], cov=1.0, count=0)])


def test_normalize_examples():
    s, amap = D.normalize_to_unit_ball(Dataset([[0.0], [2.0]]))
    assert s.points.ravel().tolist() == [-1.0, 1.0]
    assert amap.shift.tolist() == [1.0] and amap.scale == 1.0
    rng = np.random.default_rng(1)
    once, _ = D.normalize_to_unit_ball(Dataset(rng.standard_normal((50, 2))))
    twice, amap2 = D.normalize_to_unit_ball(once)
    assert abs(amap2.scale - 1.0) <= 1e-10
    assert abs(np.linalg.norm(twice.points, axis=1).max() - 1.0) <= 1e-15
    with pytest.raises(ValueError):
        D.normalize_to_unit_ball(Dataset.empty(2))


def test_affine_map_round_trip(rng):
    pts = rng.standard_normal((10, 3))
    amap = D.AffineMap(rng.standard_normal(3), 2.5)
    np.testing.assert_allclose(amap.invert(amap.apply(pts)), pts, rtol=1e-15, atol=1e-15)
    back = D.AffineMap(**json.loads(json.dumps(amap.to_json())))
    np.testing.assert_array_equal(back.apply(pts), amap.apply(pts))
    with pytest.raises(ValueError):
        D.AffineMap(np.zeros(2), 0.0)


def test_make_separable(rng):
    s1 = Dataset(rng.standard_normal((200, 2)))
    inside = Dataset(0.1 * rng.standard_normal((30, 2)))
    assert len(D.make_separable(s1, inside)) == 0
    far = Dataset(rng.standard_normal((100, 2)) * 3)
    kept = D.make_separable(s1, far)
    rep = F.run_main_algorithm(F.SeparationInstance(s1, kept, 2), F.FitSettings(update=F.EXCHANGE))
    assert rep.status == F.SEPARATED


def test_make_separable_drops_boundary():
    square = Dataset([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
    # the covering ellipse of the square passes through (sqrt 2, 0)
    edge = Dataset([[math.sqrt(2.0), 0.0], [5.0, 0.0]])
    kept = D.make_separable(square, edge)
    assert kept.points.tolist() == [[5.0, 0.0]]


def test_monte_carlo_disk():
    vol, err = D.monte_carlo_volume(DISK, ([-2, -2], [2, 2]), 1_000_000, seed=0)
    assert abs(vol - math.pi) <= 3 * err
    minus = Polynomial.from_terms(2, 0, {(0, 0): -1.0})
    assert D.monte_carlo_volume(minus, ([-1, -1], [1, 1]), 1000) == (0.0, 0.0)


def test_monte_carlo_deterministic_blocks():
    a = D.monte_carlo_volume(DISK, ([-2, -2], [2, 2]), 3 * D.MC_BLOCK + 17, seed=5)
    b = D.monte_carlo_volume(DISK, ([-2, -2], [2, 2]), 3 * D.MC_BLOCK + 17, seed=5)
    assert a == b
    with pytest.raises(ValueError):
        D.monte_carlo_volume(DISK, ([0, 0], [0, 1]), 10)


def test_volume_report():
    rep = D.volume_report(DISK, ([-1, -1], [1, 1]), 1000, seed=2)
    assert set(rep) == {"volume", "stderr", "samples", "seed"}
    assert rep["samples"] == 1000 and rep["seed"] == 2


def test_model_json_round_trip(tmp_path, circle4):
    rep = F.run_main_algorithm(F.SeparationInstance(circle4, None, 2))
    path = tmp_path / "model.json"
    D.save_model_json(rep, path)
    back = D.load_model_json(path)
    assert back.status == rep.status
    np.testing.assert_array_equal(back.theta.coeffs, rep.theta.coeffs)


def test_pipeline_deterministic():
    def run():
        pts, lab = D.generate_labeled(D.ClusterSpec.default(300, 4))
        ds, _ = D.normalize_to_unit_ball(Dataset(pts))
        return F.run_main_algorithm(F.SeparationInstance(ds.subset(lab == 1), None, 2))

    a, b = run(), run()
    assert a.objective == b.objective
    np.testing.assert_array_equal(a.theta.coeffs, b.theta.coeffs)
