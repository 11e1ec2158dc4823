"""Covering and separating point clouds with polynomial level sets via moment relaxations."""

from .basis import FULL, HOMOGENEOUS, MonomialBasis, Polynomial, QuadraticForm, enumerate_monomials, eval_polynomial
from .data import AffineMap, ClusterSpec, generate_clusters, load_csv, make_separable, monte_carlo_volume, normalize_to_unit_ball
from .fitting import (
    INFEASIBLE,
    ITERATION_LIMIT,
    SEPARATED,
    FitReport,
    FitSettings,
    SeparationInstance,
    build_feasibility_problem,
    build_l1_lp,
    build_moment_relaxation,
    build_mvce_problem,
    build_separation_problem,
    feasibility_slack,
    fit,
    outside_points,
    perturb_datasets,
    run_main_algorithm,
    solve_per_point,
)
from .moments import Dataset, EmpiricalMeasure, LocalizingOperator, localizing_matrix, moment_matrix, moment_vector, uniform_measure
from .solver import AffineLmiBlock, MaxDetProblem, ScalarBlocks, Settings, Solution, solve

__all__ = [
    "FULL",
    "HOMOGENEOUS",
    "MonomialBasis",
    "Polynomial",
    "QuadraticForm",
    "enumerate_monomials",
    "eval_polynomial",
    "AffineMap",
    "ClusterSpec",
    "generate_clusters",
    "load_csv",
    "make_separable",
    "monte_carlo_volume",
    "normalize_to_unit_ball",
    "INFEASIBLE",
    "ITERATION_LIMIT",
    "SEPARATED",
    "FitReport",
    "FitSettings",
    "SeparationInstance",
    "build_feasibility_problem",
    "build_l1_lp",
    "build_moment_relaxation",
    "build_mvce_problem",
    "build_separation_problem",
    "feasibility_slack",
    "fit",
    "outside_points",
    "perturb_datasets",
    "run_main_algorithm",
    "solve_per_point",
    "Dataset",
    "EmpiricalMeasure",
    "LocalizingOperator",
    "localizing_matrix",
    "moment_matrix",
    "moment_vector",
    "uniform_measure",
    "AffineLmiBlock",
    "MaxDetProblem",
    "ScalarBlocks",
    "Settings",
    "Solution",
    "solve",
]

__version__ = "0.1.0"
