"""Compiled vs numpy kernels, plus one end-to-end covering fit per backend.

    python3 benchmarks/bench_kernels.py [--points 100000] [--repeat 5]

Backends must agree to rounding before timings are reported.  The
end-to-end fit runs in a subprocess per backend since the backend is picked
at import.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from momfit import kernels
from momfit.basis import enumerate_monomials

FIT_SNIPPET = """
import time
from momfit import ClusterSpec, SeparationInstance, FitSettings, generate_clusters, kernels, run_main_algorithm
s = generate_clusters(ClusterSpec.default({count}, seed=3))
t = time.perf_counter()
rep = run_main_algorithm(SeparationInstance(s, None, 2), FitSettings(update="exchange"))
print(kernels.BACKEND, rep.status, repr(float(rep.objective)), time.perf_counter() - t)
"""


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def bench_kernels(npts, repeat):
    rng = np.random.default_rng(0)
    rows = []
    for n, d in ((2, 4), (2, 8), (3, 8)):
        basis = enumerate_monomials(n, d)
        pts = rng.uniform(-1, 1, (npts, n))
        w = np.full(npts, 1.0 / npts)
        c = rng.standard_normal(len(basis))
        ref = {}
        for name in kernels.available_backends():
            mod = kernels.backend_module(name)
            calls = {
                "moments": lambda: mod.weighted_moments(pts, w, basis.parent, basis.var, kernels.num_threads()),
                "eval": lambda: mod.poly_eval(pts, basis.parent, basis.var, c, kernels.num_threads()),
            }
            for op, fn in calls.items():
                out = fn()
                if op in ref:
                    err = np.max(np.abs(out - ref[op])) / max(1.0, np.max(np.abs(ref[op])))
                    if err > 1e-12:
                        raise SystemExit(f"backends disagree on {op} n={n} d={d}: {err:.2e}")
                else:
                    ref[op] = out
                rows.append((op, n, d, name, best_of(fn, repeat)))
    return rows


def bench_fit(count):
    out = []
    for name in kernels.available_backends():
        env = dict(os.environ)
        if name == "python":
            env["MOMFIT_PURE_PYTHON"] = "1"
        res = subprocess.run([sys.executable, "-c", FIT_SNIPPET.format(count=count)], env=env, capture_output=True, text=True, check=True)
        out.append(res.stdout.strip())
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--points", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--fit-count", type=int, default=50_000, help="points per cluster in the end-to-end fit")
    args = ap.parse_args()

    print(f"backends: {', '.join(kernels.available_backends())}; threads: {kernels.num_threads()}; points: {args.points}")
    rows = bench_kernels(args.points, args.repeat)
    print(f"{'kernel':8} {'n':>2} {'d':>2} {'backend':8} {'seconds':>10} {'speedup':>8}")
    base = {(op, n, d): t for op, n, d, name, t in rows if name == "python"}
    for op, n, d, name, t in rows:
        print(f"{op:8} {n:2d} {d:2d} {name:8} {t:10.5f} {base[(op, n, d)] / t:8.2f}")
    print("end-to-end covering fit (backend, status, objective, seconds):")
    for line in bench_fit(args.fit_count):
        print("  " + line)


if __name__ == "__main__":
    main()
