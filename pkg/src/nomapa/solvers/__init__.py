"""Power-control solvers."""

from .barrier import ConcaveFn, ConcaveSolution, find_strictly_feasible, solve_concave_subproblem
from .common import Infeasible, SolveReport, SolverSettings
from .dinkelbach import dinkelbach_rate_profile
from .oracle import OracleResult, RateProfileObjective, SumRateObjective, WsrObjective, grid_oracle
from .projection import project_feasible
from .sumrate import sum_rate_maximize
from .wsr import QuadraticTransform, wsr_maximize, wsr_maximize_multistart

__all__ = [
    "ConcaveFn",
    "ConcaveSolution",
    "Infeasible",
    "OracleResult",
    "QuadraticTransform",
    "RateProfileObjective",
    "SolveReport",
    "SolverSettings",
    "SumRateObjective",
    "WsrObjective",
    "dinkelbach_rate_profile",
    "find_strictly_feasible",
    "grid_oracle",
    "project_feasible",
    "solve_concave_subproblem",
    "sum_rate_maximize",
    "wsr_maximize",
    "wsr_maximize_multistart",
]
