"""Simulated annealing on the master QUBO."""

from dataclasses import asdict, dataclass
from typing import List, Optional
import logging
import math
import time

import numpy as np

from .base import MasterSolution, MasterSolver, deadline, register_solver, remaining, restart_fits
from .repair import greedy_repair, no_worse_than_trivial
from .. import qubo as qubo_mod
from ..colgen import ColumnPool
from ..qubo import QuboModel
from ..seeds import component_seed, restart_rngs
from ...storage.models import DiscretizedInstance

logger = logging.getLogger(__name__)

AUDIT_TOL = 1e-6


@dataclass(frozen=True)
class AnnealSchedule:
    """Geometric temperature schedule.

    Unset temperatures are derived from the model: the start is ten times
    the largest single-flip energy change, the end a hundredth of the
    smallest nonzero coefficient.
    """
    t_initial: Optional[float] = None
    t_final: Optional[float] = None
    sweeps: int = 200
    restarts: int = 20
    seed: int = 0

    def validate(self) -> List[str]:
        errors = []
        if self.sweeps < 1:
            errors.append(f"sweeps must be >= 1, got {self.sweeps}")
        if self.restarts < 1:
            errors.append(f"restarts must be >= 1, got {self.restarts}")
        for name in ("t_initial", "t_final"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                errors.append(f"{name} must be > 0, got {value}")
        if self.t_initial and self.t_final and self.t_final > self.t_initial:
            errors.append("t_final must not exceed t_initial")
        return errors

    def temperatures(self, largest: float, smallest: float) -> np.ndarray:
        """One temperature per sweep, geometric from start to end."""
        t0 = self.t_initial if self.t_initial is not None else 10.0 * largest
        t1 = self.t_final if self.t_final is not None else 0.01 * smallest
        t0 = t0 if t0 > 0 else 1.0
        t1 = min(t1 if t1 > 0 else 1e-3 * t0, t0)
        return np.geomspace(t0, t1, self.sweeps)

    def as_params(self) -> dict:
        return {k: v for k, v in asdict(self).items() if k != "seed"}


def _anneal_chain(m: QuboModel, temps: np.ndarray, rng: np.random.Generator,
                  stop_at: Optional[float] = None) -> tuple[np.ndarray, float]:
    n = m.n
    W = m.couplings
    indptr, indices, data = W.indptr, W.indices, W.data
    x = rng.integers(0, 2, size=n).astype(np.int64)
    h = m.local_fields(x.astype(float))
    e = qubo_mod.energy(m, x)
    best_x, best_e = x.copy(), e

    for T in temps:
        order = rng.permutation(n)
        draws = rng.random(n)
        for k in range(n):
            i = order[k]
            delta = h[i] if x[i] == 0 else -h[i]
            if delta > 0 and draws[k] >= math.exp(-delta / T):
                continue
            x[i] ^= 1
            e += delta
            lo, hi = indptr[i], indptr[i + 1]
            if x[i]:
                h[indices[lo:hi]] += data[lo:hi]
            else:
                h[indices[lo:hi]] -= data[lo:hi]
            if e < best_e - 1e-12:
                best_e = e
                best_x = x.copy()
        exact = qubo_mod.energy(m, x)
        if abs(exact - e) > AUDIT_TOL * (1.0 + abs(exact)):
            logger.warning(f"[SA] Incremental energy drifted by {e - exact:.3e}; resynchronizing")
            e = exact
            h = m.local_fields(x.astype(float))
        if stop_at is not None and time.perf_counter() > stop_at:
            break
    return best_x, qubo_mod.energy(m, best_x)


def anneal_qubo(m: QuboModel, sched: AnnealSchedule = AnnealSchedule(),
                time_limit_s: Optional[float] = None) -> tuple[np.ndarray, float]:
    """Best-of-restarts single-flip Metropolis annealing.

    Each restart starts from a random bit vector and runs ``sweeps`` sweeps
    in random variable order. With ``time_limit_s`` no restart starts unless
    it is expected to fit, and a running chain stops at the deadline.
    Deterministic for a given ``sched.seed`` when no limit cuts it short.

    Returns:
        (bit vector, its energy).
    """
    errors = sched.validate()
    if errors:
        raise ValueError("; ".join(errors))
    if m.n == 0:
        return np.zeros(0, dtype=np.int64), float(m.offset)
    temps = sched.temperatures(*m.flip_magnitudes())
    start = time.perf_counter()
    stop_at = deadline(start, time_limit_s)
    best_x, best_e = None, math.inf
    for k, rng in enumerate(restart_rngs(sched.seed, sched.restarts)):
        if not restart_fits(start, k, time_limit_s):
            logger.warning(f"[SA] Time limit reached after {k} of {sched.restarts} restarts")
            break
        x, e = _anneal_chain(m, temps, rng, stop_at)
        if e < best_e - 1e-12:
            best_x, best_e = x, e
        logger.debug(f"[SA] restart {k}: energy={e:.9g} best={best_e:.9g}")
    return best_x, best_e


@register_solver
class AnnealingSolver(MasterSolver):
    """QUBO simulated annealing followed by greedy repair."""

    name = "sa"

    def schedule(self, seed: int) -> AnnealSchedule:
        return AnnealSchedule(
            t_initial=self.params.get("t_initial"),
            t_final=self.params.get("t_final"),
            sweeps=self.params.get("sweeps", 200),
            restarts=self.params.get("restarts", 20),
            seed=component_seed(seed, "sa"),
        )

    def validate(self) -> List[str]:
        return self.schedule(0).validate()

    def solve(self, pool: ColumnPool, dinst: DiscretizedInstance, seed: int = 0,
              time_limit_s: Optional[float] = None) -> MasterSolution:
        start = time.perf_counter()
        model = qubo_mod.build(pool, dinst, penalty_weight=self.params.get("penalty_weight"),
                               include_uncovered=self.params.get("include_uncovered", True))
        x, energy = anneal_qubo(model, self.schedule(seed), remaining(start, time_limit_s))
        repaired = greedy_repair(pool, dinst, x, self.provenance(seed))
        solution = no_worse_than_trivial(repaired, pool, dinst)
        if solution is not repaired:
            energy = qubo_mod.energy(model, qubo_mod.solution_bits(model, solution.columns, solution.uncovered))
        solution.energy = energy
        solution.wall_s = time.perf_counter() - start
        logger.info(f"[SA] energy={energy:.9g} repaired cost={solution.cost:.9g}")
        return solution
