"""Annealing restricted to feasible set partitions.

The state is one column per vehicle with pairwise disjoint reservations; the
uncovered reservations follow from it. A move either swaps one vehicle to
another of its columns that conflicts with no other vehicle's column, or
releases the vehicle to its trivial column. This is our reading of an
annealer whose local moves stay inside the feasible subspace, not a
reproduction of any particular hardware's move set.
"""

from typing import List, Optional
import logging
import math
import time

import numpy as np

from .annealing import AnnealSchedule
from .base import (
    MasterSolution, MasterSolver, Provenance, check_feasibility, deadline, make_solution, register_solver, restart_fits
)
from ..colgen import ColumnPool
from ..seeds import component_seed, restart_rngs
from ...storage.models import DiscretizedInstance

logger = logging.getLogger(__name__)

RELEASE_PROBABILITY = 0.2


def feasible_anneal(pool: ColumnPool, dinst: DiscretizedInstance, sched: AnnealSchedule = AnnealSchedule(),
                    provenance: Optional[Provenance] = None, audit: bool = False,
                    time_limit_s: Optional[float] = None) -> MasterSolution:
    """Metropolis search over feasible states, starting from all-trivial.

    Each sweep proposes ``len(pool)`` moves. With ``audit`` every accepted
    state is run through the feasibility checker.
    """
    errors = sched.validate()
    if errors:
        raise ValueError("; ".join(errors))
    start = time.perf_counter()
    provenance = provenance or Provenance("feasible-anneal", seed=sched.seed, params=sched.as_params())
    n = dinst.n_vehicles
    trivial = [pool.trivial_index(v.id) for v in dinst.vehicles]

    masks, adjusted = [], []
    for column in pool:
        mask = 0
        for r in column.served:
            mask |= 1 << r
        masks.append(mask)
        adjusted.append(column.cost - sum(dinst.uncovered_cost(r) for r in column.served))
    swaps = [[p for p in pool.columns_for_vehicle(v.id) if p != trivial[v.id]] for v in dinst.vehicles]

    gaps = [abs(adjusted[p] - adjusted[trivial[pool[p].vehicle]]) for p in range(len(pool))]
    nonzero = [g for g in gaps if g > 0]
    if n == 0 or not nonzero:
        return make_solution(pool, dinst, trivial, provenance, wall_s=time.perf_counter() - start)
    temps = sched.temperatures(max(nonzero), min(nonzero))
    steps = len(pool)

    best_columns = list(trivial)
    best_value = sum(adjusted[p] for p in trivial)
    stop_at = deadline(start, time_limit_s)
    for k, rng in enumerate(restart_rngs(sched.seed, sched.restarts)):
        if not restart_fits(start, k, time_limit_s):
            logger.warning(f"[FA] Time limit reached after {k} of {sched.restarts} restarts")
            break
        chosen = list(trivial)
        used = 0
        value = best_chain = sum(adjusted[p] for p in chosen)
        for T in temps:
            vehicles = rng.integers(0, n, size=steps)
            kinds = rng.random(steps)
            picks = rng.random(steps)
            draws = rng.random(steps)
            for s in range(steps):
                v = int(vehicles[s])
                if not swaps[v] or kinds[s] < RELEASE_PROBABILITY:
                    q = trivial[v]
                else:
                    q = swaps[v][int(picks[s] * len(swaps[v]))]
                current = chosen[v]
                if q == current:
                    continue
                others = used & ~masks[current]
                if masks[q] & others:
                    continue
                delta = adjusted[q] - adjusted[current]
                if delta > 0 and draws[s] >= math.exp(-delta / T):
                    continue
                chosen[v] = q
                used = others | masks[q]
                value += delta
                if audit:
                    problems = check_feasibility(make_solution(pool, dinst, chosen, provenance), pool, dinst)
                    assert not problems, f"feasible anneal left the feasible set: {problems}"
                if value < best_chain - 1e-12:
                    best_chain = value
                    if value < best_value - 1e-12:
                        best_value = value
                        best_columns = list(chosen)
            exact = math.fsum(adjusted[p] for p in chosen)
            if abs(exact - value) > 1e-6 * (1.0 + abs(exact)):
                logger.warning(f"[FA] Running cost drifted by {value - exact:.3e}; resynchronizing")
            value = exact
            if stop_at is not None and time.perf_counter() > stop_at:
                break
        logger.debug(f"[FA] restart {k}: best={best_chain:.9g}")

    solution = make_solution(pool, dinst, best_columns, provenance, wall_s=time.perf_counter() - start)
    logger.info(f"[FA] cost={solution.cost:.9g}")
    return solution


@register_solver
class FeasibleAnnealSolver(MasterSolver):
    """Annealing over feasible partitions (no QUBO, no repair)."""

    name = "feasible-anneal"

    def schedule(self, seed: int) -> AnnealSchedule:
        return AnnealSchedule(
            t_initial=self.params.get("t_initial"),
            t_final=self.params.get("t_final"),
            sweeps=self.params.get("sweeps", 200),
            restarts=self.params.get("restarts", 20),
            seed=component_seed(seed, "feasible-anneal"),
        )

    def validate(self) -> List[str]:
        return self.schedule(0).validate()

    def solve(self, pool: ColumnPool, dinst: DiscretizedInstance, seed: int = 0,
              time_limit_s: Optional[float] = None) -> MasterSolution:
        return feasible_anneal(pool, dinst, self.schedule(seed), provenance=self.provenance(seed),
                               time_limit_s=time_limit_s)
