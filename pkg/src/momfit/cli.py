"""Command line: ``momfit {cover,separate,gen,plot}``.

Exit codes: 0 fitted (Separated / Optimal), 2 Infeasible, 3 IterationLimit,
1 for usage, I/O and solver errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import data as dio
from . import fitting
from . import solver as slv
from .basis import Polynomial
from .moments import Dataset

log = logging.getLogger("momfit")

EXIT_OK, EXIT_ERROR, EXIT_INFEASIBLE, EXIT_LIMIT = 0, 1, 2, 3
EXIT_CODES = {fitting.SEPARATED: EXIT_OK, slv.OPTIMAL: EXIT_OK, fitting.INFEASIBLE: EXIT_INFEASIBLE, fitting.ITERATION_LIMIT: EXIT_LIMIT}


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which would read as "infeasible"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _fit_flags(p):
    p.add_argument("--degree", type=int, choices=(2, 4), default=2, help="degree of theta")
    p.add_argument("--order", type=int, default=None, help="relaxation order r (default: degree)")
    p.add_argument("--mode", choices=(fitting.MOMENT, fitting.PER_POINT, fitting.LP), default=fitting.MOMENT)
    p.add_argument("--support-rule", choices=fitting.UPDATE_RULES, default=None, help="support update of the outer loop (default literal)")
    p.add_argument("--accumulate-support", action="store_true", help="same as --support-rule accumulate")
    p.add_argument("--epsilon", type=float, default=None, help="perturb the data: pad to the generic size and jitter by epsilon")
    p.add_argument("--seed", type=int, default=0, help="seed for --epsilon")
    p.add_argument("--max-outer", type=int, default=50)
    p.add_argument("--normalize", action="store_true", help="fit in coordinates scaled to the unit ball")
    p.add_argument("--solver-config", type=Path, default=None, help="key = value solver settings")
    p.add_argument("--out", type=Path, default=None, help="model JSON")
    p.add_argument("--svg", type=Path, default=None, help="plot (n = 2 only)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="momfit", description="Cover or separate point clouds with polynomial level sets.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("cover", help="minimum-volume covering set of one point cloud")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--labels", action="store_true", help="last column is a class label; cover class 1")
    _fit_flags(p)

    p = sub.add_parser("separate", help="minimum-volume set containing class 1 and excluding class 2")
    p.add_argument("--input", type=Path, required=True, help="class 1, or both classes with --labels")
    p.add_argument("--input2", type=Path, default=None, help="class 2")
    p.add_argument("--labels", action="store_true", help="last column of --input is the class (1 or 2)")
    _fit_flags(p)

    p = sub.add_parser("gen", help="sample Gaussian clusters to CSV")
    p.add_argument("--spec", type=Path, default=None, help="TOML cluster spec (default: two clusters)")
    p.add_argument("--count", type=int, default=5000, help="points per cluster without --spec")
    p.add_argument("--dim", type=int, default=2, help="dimension without --spec")
    p.add_argument("--seed", type=int, default=None, help="overrides the spec seed")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("plot", help="SVG of the data and the zero level set of a model")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--input2", type=Path, default=None)
    p.add_argument("--labels", action="store_true")
    p.add_argument("--svg", type=Path, required=True)
    p.add_argument("--title", default="")
    return parser


# --- helpers ------------------------------------------------------------------


def _read_classes(args):
    if args.labels:
        if getattr(args, "input2", None) is not None:
            raise CliError("--labels and --input2 are exclusive")
        return dio.load_csv(args.input, labels=True)
    s1 = dio.load_csv(args.input)
    s2 = dio.load_csv(args.input2) if getattr(args, "input2", None) is not None else Dataset.empty(s1.n)
    if s1.n != s2.n:
        raise CliError(f"inputs have different dimensions ({s1.n} and {s2.n})")
    return s1, s2


def _settings(args) -> fitting.FitSettings:
    rule = args.support_rule or (fitting.ACCUMULATE if args.accumulate_support else fitting.LITERAL)
    if args.accumulate_support and rule != fitting.ACCUMULATE:
        raise CliError("--accumulate-support conflicts with --support-rule " + rule)
    if args.max_outer < 1:
        raise CliError("--max-outer must be positive")
    solver = slv.Settings.from_file(args.solver_config) if args.solver_config else slv.Settings()
    return fitting.FitSettings(max_outer=args.max_outer, update=rule, solver=solver)


class _Mapped:
    """``theta`` composed with an affine map, evaluated in original coordinates."""

    def __init__(self, theta: Polynomial, amap: dio.AffineMap):
        self.theta, self.amap, self.n = theta, amap, theta.n

    def __call__(self, x):
        return self.theta(self.amap.apply(x))


def _fit(args, s1: Dataset, s2: Dataset):
    amap = None
    if args.normalize:
        both = Dataset(np.vstack([s1.points, s2.points]))
        _, amap = dio.normalize_to_unit_ball(both)
        s1, s2 = Dataset(amap.apply(s1.points)), Dataset(amap.apply(s2.points))
    r = args.order if args.order is not None else args.degree
    if args.order is not None and args.order < args.degree:
        raise CliError(f"--order must be at least --degree ({args.degree})")
    if args.epsilon is not None:
        size = math.comb(s1.n + r, r)
        s1, s2 = fitting.perturb_datasets(s1, s2, (max(size, len(s1)), max(size, len(s2)) if len(s2) else 0), args.epsilon, args.seed)
    inst = fitting.SeparationInstance(s1, s2, args.degree, r)
    report = fitting.fit(inst, args.mode, _settings(args))
    return report, s1, s2, amap


def _report(report, s1, s2, margins: bool):
    print(f"status: {report.status}")
    if report.message:
        print(f"message: {report.message}")
    print(f"objective: {report.objective:.10g}")
    print(f"outer iterations: {report.outer_iterations}")
    print("support sizes: " + " ".join(f"{a}/{b}" for a, b in report.support_sizes))
    if margins and report.theta is not None:
        print(f"min theta on S1: {float(report.theta(s1.points).min()):.6g}")
        if len(s2):
            print(f"max theta on S2: {float(report.theta(s2.points).max()):.6g}")


def _write_outputs(args, report, s1, s2, amap):
    if args.out is not None:
        obj = report.to_json()
        obj["degree"] = args.degree
        obj["normalization"] = amap.to_json() if amap is not None else None
        args.out.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
        log.info("wrote %s", args.out)
    if args.svg is not None:
        from . import plot

        theta = report.theta
        if theta is not None and amap is not None:
            theta = _Mapped(theta, amap)
            s1, s2 = Dataset(amap.invert(s1.points)), Dataset(amap.invert(s2.points))
        plot.save_svg(args.svg, [(s1.points, 1), (s2.points, 2)], theta)
        log.info("wrote %s", args.svg)


# --- commands -----------------------------------------------------------------


def cmd_cover(args) -> int:
    s1, _ = _read_classes(args)
    s2 = Dataset.empty(s1.n)
    report, s1, s2, amap = _fit(args, s1, s2)
    _report(report, s1, s2, margins=False)
    _write_outputs(args, report, s1, s2, amap)
    return EXIT_CODES.get(report.status, EXIT_ERROR)


def cmd_separate(args) -> int:
    s1, s2 = _read_classes(args)
    if len(s2) == 0:
        raise CliError("no class-2 points; use cover for a single cloud")
    report, s1, s2, amap = _fit(args, s1, s2)
    if report.status == fitting.INFEASIBLE:
        print("infeasible: no degree-%d set separates the classes" % args.degree)
    _report(report, s1, s2, margins=True)
    _write_outputs(args, report, s1, s2, amap)
    return EXIT_CODES.get(report.status, EXIT_ERROR)


def cmd_gen(args) -> int:
    if args.spec is not None:
        spec = dio.ClusterSpec.from_toml(args.spec.read_text())
    else:
        spec = dio.ClusterSpec.default(args.count, 0, args.dim)
    if args.seed is not None:
        spec.seed = args.seed
    pts, labels = dio.generate_labeled(spec)
    dio.save_csv(args.out, pts, labels, header=True)
    print(f"wrote {len(pts)} points to {args.out}")
    return EXIT_OK


def cmd_plot(args) -> int:
    from . import plot

    obj = json.loads(args.model.read_text())
    report = fitting.FitReport.from_json(obj)
    s1, s2 = _read_classes(args)
    if s1.n != 2:
        raise plot.UnsupportedDimension(f"plotting is 2-D only, got n = {s1.n}")
    theta = report.theta
    if theta is not None and obj.get("normalization"):
        theta = _Mapped(theta, dio.AffineMap(**obj["normalization"]))
    if theta is not None and theta.n != s1.n:
        raise CliError(f"model has n = {theta.n}, data has n = {s1.n}")
    plot.save_svg(args.svg, [(s1.points, 1), (s2.points, 2)], theta, title=args.title)
    print(f"wrote {args.svg}")
    return EXIT_OK


COMMANDS = {"cover": cmd_cover, "separate": cmd_separate, "gen": cmd_gen, "plot": cmd_plot}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (CliError, OSError, ValueError, fitting.FitError, slv.SolverError) as exc:
        print(f"momfit {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
