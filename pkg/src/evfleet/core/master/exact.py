"""Depth-first branch and bound over one column per vehicle."""

from typing import Optional
import logging
import time

import numpy as np

from .base import MasterSolution, MasterSolver, Provenance, make_solution, register_solver
from ..colgen import ColumnPool
from ..constants import COST_TOL
from ...storage.models import DiscretizedInstance

logger = logging.getLogger(__name__)

_CLOCK_EVERY = 1024   # nodes between wall-clock checks


def solve_exact(pool: ColumnPool, dinst: DiscretizedInstance, time_limit: Optional[float] = None,
                provenance: Optional[Provenance] = None) -> MasterSolution:
    """Optimal master solution over ``pool``.

    The cost is rewritten as ``sum_r u_r + sum_p (c_p - sum_{r in p} u_r)``
    so each vehicle contributes an adjusted column cost independent of the
    others. Vehicles are branched in id order over their non-conflicting
    columns by ascending adjusted cost, trivial column last; a branch is cut
    when the running adjusted cost plus each remaining vehicle's cheapest
    adjusted cost cannot beat the incumbent. The all-trivial solution is the
    first incumbent.

    Returns:
        The best solution found; ``optimal`` is False if ``time_limit``
        (seconds) stopped the search.
    """
    start = time.perf_counter()
    n = dinst.n_vehicles
    uncovered_total = sum(dinst.uncovered_cost(r.id) for r in dinst.reservations)

    masks = []
    adjusted = []
    for column in pool:
        mask = 0
        for r in column.served:
            mask |= 1 << r
        masks.append(mask)
        adjusted.append(column.cost - sum(dinst.uncovered_cost(r) for r in column.served))

    branches, trivials = [], []
    for vehicle in dinst.vehicles:
        trivial = pool.trivial_index(vehicle.id)
        others = [p for p in pool.columns_for_vehicle(vehicle.id) if p != trivial]
        others.sort(key=lambda p: (adjusted[p], p))
        branches.append(others)
        trivials.append(trivial)
    cheapest = [min([adjusted[p] for p in options] + [adjusted[t]])
                for options, t in zip(branches, trivials)]
    # completion[k] = best possible adjusted cost of vehicles k..n-1 ignoring conflicts
    completion = np.concatenate([np.cumsum(cheapest[::-1])[::-1], [0.0]]) if n else np.zeros(1)

    best_columns = [pool.trivial_index(v.id) for v in dinst.vehicles]
    best_value = sum(adjusted[p] for p in best_columns)
    current = [0] * n
    nodes = 0
    timed_out = False

    def visit(k: int, p: int, used: int, value: float) -> bool:
        """Branch on column p for vehicle k. False when the bound cuts it off."""
        nonlocal nodes, timed_out
        nodes += 1
        if nodes % _CLOCK_EVERY == 0 and time_limit is not None \
                and time.perf_counter() - start > time_limit:
            timed_out = True
        if timed_out:
            return False
        if value + adjusted[p] + completion[k + 1] >= best_value - COST_TOL:
            return False
        current[k] = p
        descend(k + 1, used | masks[p], value + adjusted[p])
        return True

    def descend(k: int, used: int, value: float) -> None:
        nonlocal best_value, best_columns
        if k == n:
            if value < best_value - COST_TOL:
                best_value = value
                best_columns = list(current)
            return
        for p in branches[k]:
            if masks[p] & used:
                continue
            # Options are sorted, so a cut ends the scan.
            if not visit(k, p, used, value) or timed_out:
                break
        if not timed_out:
            visit(k, trivials[k], used, value)

    descend(0, 0, 0.0)
    wall = time.perf_counter() - start
    if timed_out:
        logger.warning(f"[EXACT] Time limit {time_limit}s hit after {nodes} nodes; returning incumbent")
    else:
        logger.info(f"[EXACT] Optimal {best_value + uncovered_total:.9g} in {nodes} nodes ({wall:.2f}s)")
    return make_solution(pool, dinst, best_columns, provenance or Provenance("exact"),
                         optimal=not timed_out, wall_s=wall)


@register_solver
class ExactSolver(MasterSolver):
    """Exact branch and bound."""

    name = "exact"

    def solve(self, pool: ColumnPool, dinst: DiscretizedInstance, seed: int = 0,
              time_limit_s: Optional[float] = None) -> MasterSolution:
        limits = [t for t in (time_limit_s, self.params.get("time_limit_s")) if t is not None]
        limit = min(limits) if limits else None
        return solve_exact(pool, dinst, limit, provenance=self.provenance(seed))
