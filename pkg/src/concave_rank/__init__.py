"""Ranking under a concave combination of two cumulative scores."""

__version__ = "0.1.0"

from .objective import ConcaveObjective, DomainError, InvalidObjective, ObjectiveError, objective_for
from .rank_core import (
    GenericityError,
    Instance,
    SolveResult,
    SolverError,
    dcg_weights,
    solve_rank,
    solve_rank_integer,
    solve_rank_randomized,
    topk_solve,
    topk_weights,
)
from .inversions import count_critical, sample_critical, sample_inversion
from .multirank import MultiProblem, MultiResult, SolverParams, make_problem, multi_topk, solve_multirank

__all__ = [
    "__version__",
    "ConcaveObjective",
    "DomainError",
    "GenericityError",
    "Instance",
    "InvalidObjective",
    "MultiProblem",
    "MultiResult",
    "ObjectiveError",
    "SolveResult",
    "SolverError",
    "SolverParams",
    "count_critical",
    "dcg_weights",
    "make_problem",
    "multi_topk",
    "objective_for",
    "sample_critical",
    "sample_inversion",
    "solve_multirank",
    "solve_rank",
    "solve_rank_integer",
    "solve_rank_randomized",
    "topk_solve",
    "topk_weights",
]
