"""Solvers for the integer set-partition master over a column pool."""

from .base import (
    MasterSolution,
    MasterSolver,
    Provenance,
    check_feasibility,
    get_solver,
    list_solvers,
    make_solution,
    register_solver,
)
from .repair import greedy_repair

# Import solver modules to register them
from .exact import ExactSolver, solve_exact
from .annealing import AnnealSchedule, AnnealingSolver, anneal_qubo
from .tabu import TabuParams, TabuSolver, tabu_qubo
from .feasible_anneal import FeasibleAnnealSolver, feasible_anneal

__all__ = [
    'MasterSolution',
    'MasterSolver',
    'Provenance',
    'check_feasibility',
    'get_solver',
    'list_solvers',
    'make_solution',
    'register_solver',
    'greedy_repair',
    'ExactSolver',
    'solve_exact',
    'AnnealSchedule',
    'AnnealingSolver',
    'anneal_qubo',
    'TabuParams',
    'TabuSolver',
    'tabu_qubo',
    'FeasibleAnnealSolver',
    'feasible_anneal',
]
