"""Proximal gradient methods for convex multiobjective problems F_j = G_j + H_j."""

from .convexprog import (InvalidUncertaintySetError, LpProblem, PolyhedralSet,
                         QpProblem, solve_lp, solve_qp)
from .core import (BoxDomain, Counters, NonsmoothPart, ObjectiveValues,
                   ProblemInstance, SmoothPart, dominates_weakly,
                   is_weak_pareto_in_set, objective_values)
from .metrics import (FrontSet, ProfileTable, nondominated_filter,
                      performance_profile, purity, spread_delta, spread_gamma)
from .problems import (RobustSpec, catalog_names, draw_robust_spec,
                       load_manifest, make_problem, robustify, sample_start)
from .solvers import (ALGORITHMS, CONVERGED, RunResult, SolverConfig,
                      check_stationarity, run)
from .subproblem import SubproblemSolution, solve_proximal

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS", "BoxDomain", "CONVERGED", "Counters", "FrontSet",
    "InvalidUncertaintySetError", "LpProblem", "NonsmoothPart",
    "ObjectiveValues", "PolyhedralSet", "ProblemInstance", "ProfileTable",
    "QpProblem", "RobustSpec", "RunResult", "SmoothPart", "SolverConfig",
    "SubproblemSolution", "catalog_names", "check_stationarity",
    "dominates_weakly", "draw_robust_spec", "is_weak_pareto_in_set",
    "load_manifest", "make_problem", "nondominated_filter", "objective_values",
    "performance_profile", "purity", "robustify", "run", "sample_start",
    "solve_lp", "solve_proximal", "solve_qp", "spread_delta", "spread_gamma",
]
