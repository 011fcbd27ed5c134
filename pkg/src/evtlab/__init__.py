"""Extreme value statistics of circle maps with multiple correlated maxima.

Exact limiting quantities (extremal index, cluster-size distribution) via
scale-class limits, a finite-level interval-algebra oracle, and a Monte
Carlo simulator over independent orbits, plus a small CLI front end.
"""

from .arcs import ArcBudgetError, ArcSet
from .maps import (DigitOrbit, OrbitError, PiecewiseMap, ReturnTimeout,
                   affine_mod1, derivative_product, first_return_of_set,
                   forward_image, induced_first_return, iterate, lsv,
                   piecewise_affine, preimage, sample_orbit, verify_periodic)
from .observables import (LevelRegimeError, MaximalPoint, ObservableSpec,
                          ShapeFn, SpecError, boundedlog, boundedpower,
                          circle_dist,
                          evaluate, exceedance_measure, exceedance_region,
                          make_correlated_spec, make_uncorrelated_spec,
                          neglog, powerlaw, solve_threshold)
from .analytic import (AnalyticError, EIResult, IndeterminateError,
                       MultiplicityResult, OracleResult, ScaleExpr,
                       analytic_multiplicity, analytic_theta, limit_ratio,
                       oracle_at_scale, oracle_cluster_sets,
                       return_time_table, select_q)
from .tails import TailError, TailType, classify_shape, classify_spec, compete
from .simulate import (ClusterStats, ExperimentPlan, InducedComparison,
                       SimulationResult, cluster_pattern,
                       compare_induced_repp, extract_clusters, run_experiment)

__version__ = "0.1.0"

__all__ = [
    "ArcBudgetError", "ArcSet",
    "DigitOrbit", "OrbitError", "PiecewiseMap", "ReturnTimeout",
    "affine_mod1", "derivative_product", "first_return_of_set",
    "forward_image", "induced_first_return", "iterate", "lsv",
    "piecewise_affine", "preimage", "sample_orbit", "verify_periodic",
    "LevelRegimeError", "MaximalPoint", "ObservableSpec", "ShapeFn",
    "SpecError", "boundedlog", "boundedpower", "circle_dist", "evaluate",
    "exceedance_measure", "exceedance_region", "make_correlated_spec",
    "make_uncorrelated_spec", "neglog", "powerlaw", "solve_threshold",
    "AnalyticError", "EIResult", "IndeterminateError", "MultiplicityResult",
    "OracleResult", "ScaleExpr", "analytic_multiplicity", "analytic_theta",
    "limit_ratio", "oracle_at_scale", "oracle_cluster_sets",
    "return_time_table", "select_q",
    "TailError", "TailType", "classify_shape", "classify_spec", "compete",
    "ClusterStats", "ExperimentPlan", "InducedComparison", "SimulationResult",
    "cluster_pattern", "compare_induced_repp", "extract_clusters",
    "run_experiment",
    "__version__",
]
