"""MILP modelling, a dense simplex / branch-and-bound solver, and LP-file export."""
from .bnb import SolverSettings, solve
from .lpformat import export_lp_text
from .model import Constraint, LinExpr, MilpModel, MilpSolution, Sense, SolveStats, Status, Variable, VarKind
from .simplex import lp_relaxation

__all__ = [
    "Constraint",
    "LinExpr",
    "MilpModel",
    "MilpSolution",
    "Sense",
    "SolveStats",
    "SolverSettings",
    "Status",
    "Variable",
    "VarKind",
    "export_lp_text",
    "lp_relaxation",
    "solve",
]
