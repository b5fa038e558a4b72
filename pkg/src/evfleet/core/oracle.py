"""Exact reference solver for tiny discretized instances.

Enumerates every assignment of reservations to vehicles (or to "uncovered")
and prices each vehicle's share with its own dynamic program over (level,
timestep). It shares no code with the scenario graph or column generation,
so agreement between the two is meaningful.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional
import itertools
import logging
import math
import time

import numpy as np

from . import constants
from .colgen import ColumnPool
from .master.base import MasterSolution
from .master.exact import solve_exact
from .scenario_graph import build_graph
from .status import get_status_manager
from ..storage.models import DiscretizedInstance

logger = logging.getLogger(__name__)

MATCH_TOL = 1e-6


class OracleScaleError(ValueError):
    """The instance is too large to enumerate."""


class OracleMismatchError(RuntimeError):
    """The two exact methods disagree."""


@dataclass(frozen=True)
class VehiclePlan:
    """A vehicle's charging plan and the reservations it serves.

    ``levels[t]`` is the SoC level at the start of timestep ``t`` (with
    ``levels[t_max]`` the final level); during a reservation the level is
    held at its pickup value and drops when the car returns.
    """
    vehicle: int
    levels: tuple[int, ...]
    charging: tuple[int, ...]
    served: tuple[int, ...]
    cost: float

    def recost(self, dinst: DiscretizedInstance) -> float:
        return math.fsum([dinst.charge_cost(t) for t in self.charging] + [dinst.terminal_cost(self.levels[-1])])

    def validate(self, dinst: DiscretizedInstance) -> list[str]:
        """Re-check SoC bounds and every transition against the instance."""
        problems = []
        if len(self.levels) != dinst.t_max + 1:
            return [f"expected {dinst.t_max + 1} levels, got {len(self.levels)}"]
        if self.levels[0] != dinst.vehicles[self.vehicle].level:
            problems.append(f"starts at level {self.levels[0]}, vehicle has {dinst.vehicles[self.vehicle].level}")
        if any(not 0 <= level <= dinst.i_max for level in self.levels):
            problems.append("level outside [0, i_max]")
        busy = {}
        for r in self.served:
            res = dinst.reservations[r]
            for t in range(res.t_start, res.t_end):
                if t in busy:
                    problems.append(f"reservations {busy[t]} and {r} overlap at t={t}")
                busy[t] = r
            if self.levels[res.t_start] < res.level:
                problems.append(f"reservation {r} picked up at level {self.levels[res.t_start]} < {res.level}")
            if self.levels[res.t_end] != self.levels[res.t_start] - res.level:
                problems.append(f"reservation {r} does not consume exactly {res.level} levels")
        charging = set(self.charging)
        for t in range(dinst.t_max):
            if t in busy:
                if t in charging:
                    problems.append(f"charging at t={t} while on reservation {busy[t]}")
                if t + 1 < dinst.reservations[busy[t]].t_end and self.levels[t + 1] != self.levels[t]:
                    problems.append(f"level changes mid-reservation at t={t}")
                continue
            step = dinst.charge_step if t in charging else 0
            if self.levels[t + 1] != self.levels[t] + step:
                problems.append(f"inconsistent transition at t={t}")
        if abs(self.recost(dinst) - self.cost) > constants.COST_TOL * (1.0 + abs(self.cost)) * 1e3:
            problems.append(f"cost {self.cost} != recomputed {self.recost(dinst)}")
        return problems


@dataclass(frozen=True)
class OracleResult:
    cost: float
    assignment: tuple[Optional[int], ...]    # vehicle per reservation, None if uncovered
    plans: tuple[VehiclePlan, ...]
    assignments_checked: int = 0
    wall_s: float = 0.0

    def to_dict(self) -> dict:
        return {
            "cost": self.cost,
            "assignment": list(self.assignment),
            "plans": [
                {"vehicle": p.vehicle, "levels": list(p.levels), "charging": list(p.charging),
                 "served": list(p.served), "cost": p.cost}
                for p in self.plans
            ],
            "assignments_checked": self.assignments_checked,
        }


class CrossCheck(NamedTuple):
    oracle: OracleResult
    master: MasterSolution
    n_columns: int


class _VehiclePlanner:
    """Minimum-cost plan of one vehicle for a mandatory reservation set."""

    def __init__(self, dinst: DiscretizedInstance):
        self.dinst = dinst
        self._memo: dict[tuple[int, tuple[int, ...]], Optional[VehiclePlan]] = {}

    def plan(self, vehicle: int, served: tuple[int, ...]) -> Optional[VehiclePlan]:
        key = (vehicle, served)
        if key not in self._memo:
            self._memo[key] = self._solve(vehicle, served)
        return self._memo[key]

    def _solve(self, vehicle: int, served: tuple[int, ...]) -> Optional[VehiclePlan]:
        d = self.dinst
        bookings = sorted((d.reservations[r] for r in served), key=lambda res: res.t_start)
        for a, b in zip(bookings, bookings[1:]):
            if a.t_end > b.t_start:
                return None
        starts = {res.t_start: res for res in bookings}

        levels = d.i_max + 1
        k = d.charge_step
        cost = np.full(levels, np.inf)
        cost[d.vehicles[vehicle].level] = 0.0
        # (time the step started, action, predecessor level per level)
        history: list[tuple[int, str, np.ndarray]] = []
        t = 0
        while t < d.t_max:
            nxt = np.full(levels, np.inf)
            prev = np.full(levels, -1, dtype=np.int64)
            if t in starts:
                res = starts[t]
                for level in range(res.level, levels):
                    if cost[level] < nxt[level - res.level]:
                        nxt[level - res.level] = cost[level]
                        prev[level - res.level] = level
                history.append((t, f"serve:{res.id}", prev))
                t = res.t_end
            else:
                price = d.charge_cost(t)
                for level in range(levels):
                    best, source = cost[level], level
                    if level - k >= 0 and cost[level - k] + price < best:
                        best, source = cost[level - k] + price, level - k
                    nxt[level] = best
                    prev[level] = source if np.isfinite(best) else -1
                history.append((t, "step", prev))
                t += 1
            cost = nxt
            if not np.any(np.isfinite(cost)):
                return None

        totals = cost + np.array([d.terminal_cost(level) for level in range(levels)])
        final = int(np.argmin(totals))
        if not np.isfinite(totals[final]):
            return None

        trajectory = [0] * (d.t_max + 1)
        trajectory[d.t_max] = final
        charging = []
        level = final
        for t_step, action, prev in reversed(history):
            before = int(prev[level])
            if action == "step":
                if before != level:
                    charging.append(t_step)
                trajectory[t_step] = before
            else:
                res = d.reservations[int(action.split(":")[1])]
                for t_hold in range(res.t_start, res.t_end):
                    trajectory[t_hold] = before
            level = before
        charging.reverse()
        plan = VehiclePlan(vehicle=vehicle, levels=tuple(trajectory), charging=tuple(charging),
                           served=tuple(sorted(served)), cost=0.0)
        return VehiclePlan(plan.vehicle, plan.levels, plan.charging, plan.served, plan.recost(d))


def assignment_space(dinst: DiscretizedInstance) -> int:
    return (dinst.n_vehicles + 1) ** dinst.n_reservations


def solve_oracle(dinst: DiscretizedInstance,
                 max_assignments: int = constants.DEFAULT_ORACLE_MAX_ASSIGNMENTS) -> OracleResult:
    """Exact optimum by assignment enumeration and per-vehicle DP.

    Assignments are visited in lexicographic order (vehicle ids, then
    "uncovered" as the last choice); the first minimum wins.

    Raises:
        OracleScaleError: If ``(n + 1) ** r_max`` exceeds ``max_assignments``.
    """
    space = assignment_space(dinst)
    if space > max_assignments:
        raise OracleScaleError(
            f"{space} assignments for n={dinst.n_vehicles}, r_max={dinst.n_reservations} "
            f"exceeds the limit of {max_assignments}"
        )
    start = time.perf_counter()
    n, R = dinst.n_vehicles, dinst.n_reservations
    planner = _VehiclePlanner(dinst)
    uncovered = [dinst.uncovered_cost(r) for r in range(R)]

    best_cost = math.inf
    best_choice: Optional[tuple[int, ...]] = None
    checked = 0
    for choice in itertools.product(range(n + 1), repeat=R):
        checked += 1
        shares: list[list[int]] = [[] for _ in range(n)]
        extra = 0.0
        for r, v in enumerate(choice):
            if v == n:
                extra += uncovered[r]
            else:
                shares[v].append(r)
        total = extra
        for v in range(n):
            plan = planner.plan(v, tuple(shares[v]))
            if plan is None:
                total = math.inf
                break
            total += plan.cost
            if total >= best_cost:
                break
        if total < best_cost - constants.COST_TOL:
            best_cost, best_choice = total, choice

    assert best_choice is not None, "the all-uncovered assignment is always feasible"
    plans = tuple(
        planner.plan(v, tuple(r for r, owner in enumerate(best_choice) if owner == v)) for v in range(n)
    )
    cost = math.fsum([plan.cost for plan in plans] +
                     [uncovered[r] for r, owner in enumerate(best_choice) if owner == n])
    result = OracleResult(
        cost=cost,
        assignment=tuple(None if owner == n else owner for owner in best_choice),
        plans=plans,
        assignments_checked=checked,
        wall_s=time.perf_counter() - start,
    )
    logger.info(f"[ORACLE] Optimum {cost:.9g} over {checked} assignments ({result.wall_s:.2f}s)")
    return result


def cross_validate(dinst: DiscretizedInstance,
                   max_assignments: int = constants.DEFAULT_ORACLE_MAX_ASSIGNMENTS,
                   path_limit: int = constants.DEFAULT_PATH_LIMIT) -> CrossCheck:
    """Run both exact methods and insist they agree.

    Raises:
        OracleScaleError: If assignment enumeration is too large.
        PathLimitError: If path enumeration is too large.
        OracleMismatchError: If the optima differ by more than 1e-6.
    """
    status = get_status_manager()
    oracle = solve_oracle(dinst, max_assignments)
    pool = ColumnPool.with_all_paths(build_graph(dinst), path_limit)
    master = solve_exact(pool, dinst)
    if abs(oracle.cost - master.cost) > MATCH_TOL:
        status.error("oracle", f"Exact methods disagree: {oracle.cost} vs {master.cost}")
        raise OracleMismatchError(
            f"assignment enumeration gives {oracle.cost:.9f}, all-paths master gives {master.cost:.9f}"
        )
    status.success("oracle", f"Exact methods agree on {oracle.cost:.6f} ({len(pool)} columns)")
    return CrossCheck(oracle, master, len(pool))
