"""Master solution type, feasibility checker and solver registry."""

from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence
import json
import logging
import math
import time

from ..colgen import ColumnPool
from ...storage.models import DiscretizedInstance

logger = logging.getLogger(__name__)

SUMMARY_COLUMNS = ["solver", "seed", "params", "cost", "feasible", "optimal", "wall_s", "energy"]


@dataclass(frozen=True)
class Provenance:
    """Which solver produced a solution, and how."""
    solver: str
    seed: Optional[int] = None
    params: Dict[str, Any] = field(default_factory=dict)

    def params_json(self) -> str:
        return json.dumps(self.params, sort_keys=True)


@dataclass
class MasterSolution:
    """One column per vehicle (pool indices, vehicle order) and y per reservation."""
    columns: tuple[int, ...]
    uncovered: tuple[int, ...]
    cost: float
    feasible: bool
    provenance: Provenance
    optimal: bool = False
    energy: Optional[float] = None
    wall_s: float = 0.0

    def served_by(self, pool: ColumnPool) -> dict[int, int]:
        """Reservation id -> vehicle id for covered reservations."""
        owners = {}
        for p in self.columns:
            for r in pool[p].served:
                owners[r] = pool[p].vehicle
        return owners

    def summary_row(self) -> dict:
        """Row of the solver run summary CSV."""
        return {
            "solver": self.provenance.solver,
            "seed": self.provenance.seed,
            "params": self.provenance.params_json(),
            "cost": self.cost,
            "feasible": self.feasible,
            "optimal": self.optimal,
            "wall_s": self.wall_s,
            "energy": self.energy,
        }

    def to_dict(self, pool: ColumnPool) -> dict:
        """Solution JSON body (see README for the schema)."""
        graph = pool.graph
        dinst = pool.dinst
        vehicles = []
        for v, p in enumerate(self.columns):
            column = pool[p]
            vehicles.append({
                "vehicle": v,
                "column": p,
                "column_hash": column.content_hash,
                "trivial": column.trivial,
                "cost": column.cost,
                "served": sorted(column.served),
                "arcs": graph.describe_column(column),
            })
        return {
            "solver": self.provenance.solver,
            "seed": self.provenance.seed,
            "params": self.provenance.params,
            "cost": self.cost,
            "feasible": self.feasible,
            "optimal": self.optimal,
            "energy": self.energy,
            "vehicles": vehicles,
            "uncovered": [
                {"reservation": r, "y": y, "cost": dinst.uncovered_cost(r) if y else 0.0}
                for r, y in enumerate(self.uncovered)
            ],
        }


def restart_fits(start: float, done: int, time_limit_s: Optional[float]) -> bool:
    """Whether one more restart, as long as the average of the ``done`` so far,
    still ends within ``time_limit_s`` of ``start``."""
    if time_limit_s is None or done == 0:
        return True
    elapsed = time.perf_counter() - start
    return elapsed * (done + 1) / done <= time_limit_s


def remaining(start: float, time_limit_s: Optional[float]) -> Optional[float]:
    """What is left of ``time_limit_s`` since ``start``, floored at zero."""
    if time_limit_s is None:
        return None
    return max(0.0, time_limit_s - (time.perf_counter() - start))


def deadline(start: float, time_limit_s: Optional[float]) -> Optional[float]:
    """Absolute ``perf_counter`` time a run started at ``start`` must stop by."""
    return None if time_limit_s is None else start + time_limit_s


def solution_cost(pool: ColumnPool, dinst: DiscretizedInstance, columns: Sequence[int],
                  uncovered: Sequence[int]) -> float:
    return math.fsum([pool[p].cost for p in columns] +
                     [dinst.uncovered_cost(r) for r, y in enumerate(uncovered) if y])


def make_solution(pool: ColumnPool, dinst: DiscretizedInstance, columns: Sequence[int],
                  provenance: Provenance, **extra: Any) -> MasterSolution:
    """Solution from one column per vehicle; y covers whatever the columns leave unserved."""
    served = set()
    for p in columns:
        served.update(pool[p].served)
    uncovered = tuple(0 if r.id in served else 1 for r in dinst.reservations)
    solution = MasterSolution(
        columns=tuple(int(p) for p in columns),
        uncovered=uncovered,
        cost=solution_cost(pool, dinst, columns, uncovered),
        feasible=False,
        provenance=provenance,
        **extra,
    )
    solution.feasible = not check_feasibility(solution, pool, dinst)
    return solution


def check_feasibility(solution: MasterSolution, pool: ColumnPool, dinst: DiscretizedInstance) -> List[str]:
    """Independent check of the set-partition constraints and the reported cost.

    Returns:
        Violations found (empty when the solution is feasible).
    """
    problems = []
    if len(solution.columns) != dinst.n_vehicles:
        problems.append(f"expected {dinst.n_vehicles} columns, got {len(solution.columns)}")
    if len(solution.uncovered) != dinst.n_reservations:
        problems.append(f"expected {dinst.n_reservations} y values, got {len(solution.uncovered)}")
    if problems:
        return problems

    coverage = [0] * dinst.n_reservations
    for v, p in enumerate(solution.columns):
        if not 0 <= p < len(pool):
            problems.append(f"vehicle {v}: column index {p} outside pool")
            continue
        if pool[p].vehicle != v:
            problems.append(f"vehicle {v}: column {p} belongs to vehicle {pool[p].vehicle}")
        for r in pool[p].served:
            coverage[r] += 1
    for r, y in enumerate(solution.uncovered):
        if y not in (0, 1):
            problems.append(f"reservation {r}: y={y} is not binary")
        if coverage[r] + y != 1:
            problems.append(f"reservation {r}: covered {coverage[r]} times with y={y}")

    if not problems:
        expected = solution_cost(pool, dinst, solution.columns, solution.uncovered)
        if abs(expected - solution.cost) > 1e-9 * (1.0 + abs(expected)):
            problems.append(f"reported cost {solution.cost} != recomputed {expected}")
    return problems


class MasterSolver(ABC):
    """A method for the integer master over a fixed column pool."""

    name: str = "base"
    component: str = ""

    def __init__(self, **params):
        self.params = {k: v for k, v in params.items() if v is not None}

    @abstractmethod
    def solve(self, pool: ColumnPool, dinst: DiscretizedInstance, seed: int = 0,
              time_limit_s: Optional[float] = None) -> MasterSolution:
        """Return a feasible solution over ``pool``."""

    def validate(self) -> List[str]:
        """Validate solver parameters. Returns list of error messages."""
        return []

    def provenance(self, seed: Optional[int]) -> Provenance:
        return Provenance(solver=self.name, seed=seed, params=dict(self.params))

    def __repr__(self):
        return f"{self.__class__.__name__}({self.params})"


_SOLVER_REGISTRY: Dict[str, type] = {}


def register_solver(solver_class: type) -> type:
    """Decorator to register a master solver class."""
    _SOLVER_REGISTRY[solver_class.name] = solver_class
    return solver_class


def get_solver_class(name: str) -> Optional[type]:
    return _SOLVER_REGISTRY.get(name)


def get_solver(name: str, **params) -> MasterSolver:
    """Instantiate a registered solver."""
    solver_class = get_solver_class(name)
    if not solver_class:
        raise ValueError(f"Unknown solver: {name} (choose from {', '.join(list_solvers())})")
    solver = solver_class(**params)
    errors = solver.validate()
    if errors:
        raise ValueError(f"{name}: " + "; ".join(errors))
    return solver


def list_solvers() -> List[str]:
    """Registered solver names in registration order."""
    return list(_SOLVER_REGISTRY.keys())
