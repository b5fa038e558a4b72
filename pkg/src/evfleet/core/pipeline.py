"""End-to-end solve pipeline: discretize, graph, column generation, master."""

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, NamedTuple, Optional, TypeVar
import logging
import time

from . import colgen, constants
from .colgen import ColgenLimits, ColgenResult
from .master import MasterSolution, check_feasibility, get_solver
from .scenario_graph import ScenarioGraph, build_graph
from .status import StatusManager, get_status_manager
from ..storage.models import DiscretizedInstance, Instance, discretize

logger = logging.getLogger(__name__)

T = TypeVar("T")


class Stage(Enum):
    LOAD = "load"
    DISCRETIZE = "discretize"
    GRAPH = "graph"
    COLGEN = "colgen"
    MASTER = "master"
    REPORT = "report"


class StageError(RuntimeError):
    """A pipeline stage failed; ``cause`` is the original exception."""

    def __init__(self, stage: Stage, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"{stage.value}: {cause}")


class InfeasibleSolutionError(RuntimeError):
    """A master solver returned a solution that fails the feasibility check."""


def run_stage(stage: Stage, fn: Callable[..., T], *args: Any, **kwargs: Any) -> T:
    """Call ``fn`` and re-raise any failure tagged with ``stage``."""
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as e:
        logger.debug(f"[{stage.value.upper()}] {type(e).__name__}: {e}")
        raise StageError(stage, e) from e


@dataclass
class SolveOptions:
    """Pipeline settings; ``solver_params`` maps a solver name to its keyword parameters.

    ``budget_s`` is the wall budget of column generation and the master
    together; ``time_limit_s`` additionally caps each stage on its own.
    """
    solver: str = "exact"
    seed: int = 0
    time_limit_s: Optional[float] = None
    budget_s: Optional[float] = constants.DEFAULT_SOLVE_BUDGET_S
    all_columns: bool = False
    path_limit: int = constants.DEFAULT_PATH_LIMIT
    limits: ColgenLimits = field(default_factory=ColgenLimits)
    solver_params: dict = field(default_factory=dict)


@dataclass
class SolveOutcome:
    dinst: DiscretizedInstance
    graph: ScenarioGraph
    colgen: ColgenResult
    solution: MasterSolution
    wall_s: float

    @property
    def lp_bound(self) -> float:
        return self.colgen.report.lp_objective


class ColumnStage(NamedTuple):
    dinst: DiscretizedInstance
    graph: ScenarioGraph
    colgen: ColgenResult


def _effective_limits(options: SolveOptions) -> ColgenLimits:
    limits = options.limits
    caps = [limits.max_wall_s]
    if options.time_limit_s is not None:
        caps.append(options.time_limit_s)
    if options.budget_s is not None:
        caps.append(constants.COLGEN_BUDGET_SHARE * options.budget_s)
    if min(caps) == limits.max_wall_s:
        return limits
    return replace(limits, max_wall_s=min(caps))


def master_time_limit(options: SolveOptions, colgen_wall_s: float) -> Optional[float]:
    """Wall time left for the master once column generation took ``colgen_wall_s``."""
    caps = []
    if options.time_limit_s is not None:
        caps.append(options.time_limit_s)
    if options.budget_s is not None:
        caps.append(max(constants.MIN_MASTER_S, options.budget_s - colgen_wall_s))
    return min(caps) if caps else None


def generate_columns(inst: Instance, options: SolveOptions,
                     status: Optional[StatusManager] = None) -> ColumnStage:
    """Discretize, build the graph and run column generation.

    With ``all_columns`` the pool is seeded with every plan of every vehicle.
    """
    dinst = run_stage(Stage.DISCRETIZE, discretize, inst)
    graph = run_stage(Stage.GRAPH, build_graph, dinst)
    initial = ()
    if options.all_columns:
        initial = run_stage(Stage.GRAPH, lambda: [
            column for v in dinst.vehicles for column in graph.enumerate_columns(v.id, options.path_limit)
        ])
    result = run_stage(Stage.COLGEN, colgen.run, dinst, _effective_limits(options), graph, initial, status)
    return ColumnStage(dinst, graph, result)


def solve_master(stage: ColumnStage, solver_name: str, options: SolveOptions,
                 time_limit_s: Optional[float] = None) -> MasterSolution:
    """Run one registered master solver on the generated pool and verify the result.

    ``time_limit_s`` defaults to what the budget leaves after column generation.
    """
    if time_limit_s is None:
        time_limit_s = master_time_limit(options, stage.colgen.report.wall_s)
    params = options.solver_params.get(solver_name, {})
    solver = run_stage(Stage.MASTER, get_solver, solver_name, **params)
    solution = run_stage(Stage.MASTER, solver.solve, stage.colgen.pool, stage.dinst, options.seed,
                         time_limit_s)
    problems = check_feasibility(solution, stage.colgen.pool, stage.dinst)
    if problems:
        raise StageError(Stage.MASTER, InfeasibleSolutionError("; ".join(problems)))
    return solution


def solve_instance(inst: Instance, options: SolveOptions,
                   status: Optional[StatusManager] = None) -> SolveOutcome:
    """Run the whole pipeline on one instance.

    Raises:
        StageError: Wrapping the failure of the named stage.
    """
    status = status or get_status_manager()
    start = time.perf_counter()
    stage = generate_columns(inst, options, status)
    solution = solve_master(stage, options.solver, options,
                            master_time_limit(options, time.perf_counter() - start))
    wall = time.perf_counter() - start
    status.success("master", f"{options.solver} done", cost=solution.cost,
                   lp_bound=stage.colgen.report.lp_objective)
    return SolveOutcome(stage.dinst, stage.graph, stage.colgen, solution, wall)
