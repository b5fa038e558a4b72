"""Root-node column generation for the set-partition master.

Each iteration solves the restricted master LP over the current pool, prices
one cheapest plan per vehicle against the row duals, and adds every plan with
negative reduced cost. It stops when pricing finds nothing or a limit is hit.
"""

from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Optional
import logging
import time

import numpy as np
import pandas as pd

from . import constants
from .lp_simplex import DualValues, LinearProgram, LpError, LpSolution, PivotRule, solve as solve_lp
from .scenario_graph import ArcWeights, Column, ScenarioGraph, build_graph
from .status import StatusManager, get_status_manager
from ..storage.models import DiscretizedInstance

logger = logging.getLogger(__name__)

__all__ = [
    "ColgenLimits", "ColgenReport", "ColgenResult", "ColgenStatus", "ColumnPool", "DualValues",
    "IterationRecord", "master_lp", "run", "split_lp_values",
]

REPORT_COLUMNS = ["iter", "lp_obj", "n_cols_added", "cumulative_cols", "elapsed_s"]


class ColumnPool:
    """Ordered, duplicate-free set of columns.

    The trivial plan of every vehicle is inserted first (pool index = vehicle
    id) and columns are never removed, so pool indices are stable.
    """

    def __init__(self, graph: ScenarioGraph):
        self.graph = graph
        self._columns: list[Column] = []
        self._index: dict[tuple, int] = {}
        self._by_vehicle: dict[int, list[int]] = {v.id: [] for v in graph.dinst.vehicles}
        for vehicle in graph.dinst.vehicles:
            self.add(graph.trivial_column(vehicle.id))

    def add(self, column: Column) -> bool:
        """Append ``column`` unless an identical one is present. Returns True if added."""
        key = column.key
        if key in self._index:
            return False
        self._index[key] = len(self._columns)
        self._by_vehicle[column.vehicle].append(len(self._columns))
        self._columns.append(column)
        return True

    def extend(self, columns: Iterable[Column]) -> int:
        return sum(self.add(column) for column in columns)

    def __len__(self) -> int:
        return len(self._columns)

    def __iter__(self) -> Iterator[Column]:
        return iter(self._columns)

    def __getitem__(self, index: int) -> Column:
        return self._columns[index]

    def __contains__(self, column: Column) -> bool:
        return column.key in self._index

    @property
    def columns(self) -> tuple[Column, ...]:
        return tuple(self._columns)

    @property
    def dinst(self) -> DiscretizedInstance:
        return self.graph.dinst

    def index_of(self, column: Column) -> int:
        return self._index[column.key]

    def columns_for_vehicle(self, vehicle: int) -> list[int]:
        """Pool indices of ``vehicle``'s columns, in insertion order."""
        return list(self._by_vehicle[vehicle])

    def trivial_index(self, vehicle: int) -> int:
        return self._by_vehicle[vehicle][0]

    @classmethod
    def with_all_paths(cls, graph: ScenarioGraph, limit: int = constants.DEFAULT_PATH_LIMIT) -> "ColumnPool":
        """Pool holding every plan of every vehicle.

        Raises:
            PathLimitError: If some vehicle has more than ``limit`` plans.
        """
        pool = cls(graph)
        for vehicle in graph.dinst.vehicles:
            pool.extend(graph.enumerate_columns(vehicle.id, limit))
        logger.info(f"[COLGEN] Enumerated {len(pool)} columns")
        return pool


def master_lp(pool: ColumnPool, dinst: DiscretizedInstance) -> LinearProgram:
    """LP relaxation of the master over ``pool``.

    Variables are ``y_0 .. y_{R-1}`` followed by one lambda per pool column,
    so appending columns never renumbers existing variables. Rows are the
    reservations, then the vehicles.
    """
    R, n, P = dinst.n_reservations, dinst.n_vehicles, len(pool)
    A = np.zeros((R + n, R + P))
    c = np.empty(R + P)
    A[np.arange(R), np.arange(R)] = 1.0
    c[:R] = [dinst.uncovered_cost(r) for r in range(R)]
    for p, column in enumerate(pool):
        j = R + p
        c[j] = column.cost
        A[R + column.vehicle, j] = 1.0
        for r in column.served:
            A[r, j] = 1.0
    return LinearProgram(c=c, A=A, b=np.ones(R + n), upper=np.ones(R + P), n_reservation_rows=R)


def split_lp_values(solution: LpSolution, n_reservations: int) -> tuple[np.ndarray, np.ndarray]:
    """(lambda per pool column, y per reservation) from a master LP solution."""
    return solution.x[n_reservations:], solution.x[:n_reservations]


class ColgenStatus(Enum):
    CONVERGED = "converged"
    ITERATION_LIMIT = "iteration_limit"
    TIME_LIMIT = "time_limit"


@dataclass
class ColgenLimits:
    max_iterations: int = constants.DEFAULT_MAX_ITERATIONS
    max_wall_s: float = constants.DEFAULT_MAX_WALL_S
    reduced_cost_tol: float = constants.DEFAULT_REDUCED_COST_TOL
    pivot_rule: str = PivotRule.BLAND.value
    warm_start: bool = True

    def validate(self) -> list[str]:
        errors = []
        if self.max_iterations < 1:
            errors.append(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not self.max_wall_s > 0:
            errors.append(f"max_wall_s must be > 0, got {self.max_wall_s}")
        if self.reduced_cost_tol < 0:
            errors.append(f"reduced_cost_tol must be >= 0, got {self.reduced_cost_tol}")
        try:
            PivotRule(self.pivot_rule)
        except ValueError:
            errors.append(f"unknown pivot rule: {self.pivot_rule}")
        return errors


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    lp_objective: float
    n_columns_added: int
    cumulative_columns: int
    elapsed_s: float

    def as_row(self) -> dict:
        return {
            "iter": self.iteration,
            "lp_obj": self.lp_objective,
            "n_cols_added": self.n_columns_added,
            "cumulative_cols": self.cumulative_columns,
            "elapsed_s": self.elapsed_s,
        }


@dataclass
class ColgenReport:
    records: list[IterationRecord] = field(default_factory=list)
    status: ColgenStatus = ColgenStatus.CONVERGED
    lp_objective: float = float("nan")
    wall_s: float = 0.0

    @property
    def iterations(self) -> int:
        return len(self.records)

    @property
    def columns_added(self) -> list[int]:
        return [rec.n_columns_added for rec in self.records]

    @property
    def trajectory(self) -> list[float]:
        return [rec.lp_objective for rec in self.records]

    @property
    def bound_valid(self) -> bool:
        """True when the final LP value is a lower bound on the integer optimum."""
        return self.status is ColgenStatus.CONVERGED

    def to_dataframe(self) -> pd.DataFrame:
        return pd.DataFrame([rec.as_row() for rec in self.records], columns=REPORT_COLUMNS)

    def write_csv(self, path: Path, append: bool = True) -> Path:
        """Write one row per iteration; appends below an existing header."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        exists = append and path.exists() and path.stat().st_size > 0
        self.to_dataframe().to_csv(path, mode="a" if exists else "w", header=not exists, index=False)
        return path


class ColgenResult(NamedTuple):
    pool: ColumnPool
    solution: LpSolution
    report: ColgenReport


def _price(graph: ScenarioGraph, duals: DualValues, tol: float) -> list[tuple[Column, float]]:
    """Cheapest plan per vehicle whose reduced cost is below ``-tol``."""
    weights = ArcWeights(duals.pi)
    improving = []
    for vehicle in graph.dinst.vehicles:
        column, weighted = graph.cheapest_scenario(vehicle.id, weights)
        reduced = weighted - duals.mu[vehicle.id]
        if reduced < -tol:
            recomputed = column.cost - sum(duals.pi[r] for r in column.served) - duals.mu[vehicle.id]
            assert recomputed < 0 and abs(recomputed - reduced) <= constants.DUALITY_TOL, (
                f"vehicle {vehicle.id}: pricing reduced cost {reduced} but recomputed {recomputed}"
            )
            improving.append((column, reduced))
    return improving


def run(
    dinst: DiscretizedInstance,
    limits: Optional[ColgenLimits] = None,
    graph: Optional[ScenarioGraph] = None,
    initial_columns: Iterable[Column] = (),
    status: Optional[StatusManager] = None,
) -> ColgenResult:
    """Column generation at the root node.

    Args:
        dinst: Discretized instance.
        limits: Iteration, wall-time and tolerance settings.
        graph: Prebuilt scenario graph (built from ``dinst`` when omitted).
        initial_columns: Columns added to the pool before the first LP.
        status: Progress sink; defaults to the global status manager.

    Returns:
        The final pool, the LP solution over it and the iteration report.

    Raises:
        ValueError: If ``limits`` are invalid.
        LpError: If the restricted master LP fails.
    """
    limits = limits or ColgenLimits()
    errors = limits.validate()
    if errors:
        raise ValueError("; ".join(errors))
    status = status or get_status_manager()
    graph = graph or build_graph(dinst)
    pool = ColumnPool(graph)
    pool.extend(initial_columns)

    report = ColgenReport()
    start = time.perf_counter()
    status.start_operation("Column generation", limits.max_iterations)
    try:
        solution = _iterate(pool, dinst, graph, limits, report, status, start)
    except Exception:
        status.end_operation(success=False)
        raise

    report.lp_objective = solution.objective
    report.wall_s = time.perf_counter() - start
    status.end_operation(success=True)
    logger.info(
        f"[COLGEN] {report.status.value} after {report.iterations} iterations: "
        f"lp={report.lp_objective:.9g} pool={len(pool)} wall={report.wall_s:.2f}s"
    )
    return ColgenResult(pool, solution, report)


def _iterate(pool: ColumnPool, dinst: DiscretizedInstance, graph: ScenarioGraph, limits: ColgenLimits,
             report: ColgenReport, status: StatusManager, start: float) -> LpSolution:
    """LP/pricing loop; fills ``report`` and returns the LP over the final pool."""
    R = dinst.n_reservations
    basis = None
    previous = float("inf")
    solution: Optional[LpSolution] = None
    report.status = ColgenStatus.ITERATION_LIMIT
    last_elapsed = 0.0

    for iteration in range(1, limits.max_iterations + 1):
        solution = solve_lp(master_lp(pool, dinst), limits.pivot_rule, basis if limits.warm_start else None)
        if not solution.is_optimal:
            raise LpError("restricted master is infeasible although trivial columns are present")
        basis = solution.basis
        if solution.objective > previous + constants.DUALITY_TOL * (1.0 + abs(previous)):
            raise LpError(f"LP objective rose from {previous} to {solution.objective}")
        previous = solution.objective

        added = 0
        for column, reduced in _price(graph, solution.duals(R), limits.reduced_cost_tol):
            if pool.add(column):
                added += 1
                logger.debug(f"[COLGEN] +column vehicle={column.vehicle} rc={reduced:.6g} "
                             f"served={sorted(column.served)}")
            else:
                logger.debug(f"[COLGEN] Pricing returned a pooled column for vehicle {column.vehicle}")

        elapsed = time.perf_counter() - start
        report.records.append(IterationRecord(iteration, solution.objective, added, len(pool), elapsed))
        status.progress(
            "colgen", f"iteration {iteration}: +{added} columns", iteration / limits.max_iterations,
            lp_obj=solution.objective, pool=len(pool),
        )
        if added == 0:
            report.status = ColgenStatus.CONVERGED
            break
        # Stop when another iteration as long as this one would overrun the cap.
        if 2.0 * elapsed - last_elapsed > limits.max_wall_s:
            report.status = ColgenStatus.TIME_LIMIT
            break
        last_elapsed = elapsed

    if report.status is not ColgenStatus.CONVERGED:
        # Columns priced in the last iteration are not in the LP yet.
        solution = solve_lp(master_lp(pool, dinst), limits.pivot_rule, basis if limits.warm_start else None)
        logger.warning(f"[COLGEN] Stopped on {report.status.value}; LP value is not a bound")
    return solution
