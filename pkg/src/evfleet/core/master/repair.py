"""Greedy feasibility repair of QUBO bit vectors."""

from typing import Optional, Sequence
import logging

from .base import MasterSolution, Provenance, make_solution
from ..constants import COST_TOL
from ..colgen import ColumnPool
from ...storage.models import DiscretizedInstance

logger = logging.getLogger(__name__)


def greedy_repair(pool: ColumnPool, dinst: DiscretizedInstance, x: Sequence[int],
                  provenance: Optional[Provenance] = None) -> MasterSolution:
    """Turn a bit vector over the pool's QUBO variables into a feasible solution.

    Selected columns are admitted in ascending (cost, pool index) order when
    their vehicle is still free and none of their reservations is taken.
    Free vehicles then get their trivial column and untaken reservations are
    marked uncovered. The y bits of ``x`` (if any) are ignored.
    """
    if len(x) < len(pool):
        raise ValueError(f"bit vector has {len(x)} entries, pool has {len(pool)} columns")
    selected = sorted((p for p in range(len(pool)) if x[p]), key=lambda p: (pool[p].cost, p))
    chosen: dict[int, int] = {}
    taken: set[int] = set()
    dropped = 0
    for p in selected:
        column = pool[p]
        if column.vehicle in chosen or not taken.isdisjoint(column.served):
            dropped += 1
            continue
        chosen[column.vehicle] = p
        taken.update(column.served)
    columns = [chosen.get(v.id, pool.trivial_index(v.id)) for v in dinst.vehicles]
    if dropped:
        logger.debug(f"Repair dropped {dropped} of {len(selected)} selected columns")
    return make_solution(pool, dinst, columns, provenance or Provenance("repair"))


def no_worse_than_trivial(solution: MasterSolution, pool: ColumnPool,
                          dinst: DiscretizedInstance) -> MasterSolution:
    """``solution``, or the all-trivial partition if that is cheaper."""
    trivial = make_solution(pool, dinst, [pool.trivial_index(v.id) for v in dinst.vehicles], solution.provenance)
    if trivial.cost < solution.cost - COST_TOL:
        logger.warning(f"Repaired cost {solution.cost:.9g} exceeds all-trivial {trivial.cost:.9g}; "
                       f"keeping all-trivial")
        return trivial
    return solution
