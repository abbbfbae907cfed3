"""Dense convex quadratic programming engine."""
from .problem import QPProblem, QPSolution, SolverSettings, Status
from .solver import solve, solve_lp

__all__ = ["QPProblem", "QPSolution", "SolverSettings", "Status", "solve", "solve_lp"]
