"""Tabu search on the master QUBO."""

from dataclasses import dataclass
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

DEFAULT_TABU_RESTARTS = 10


@dataclass(frozen=True)
class TabuParams:
    """Tenure defaults to max(7, N // 10), capped at N // 4 on small models;
    iterations default to max(500, 20 * N)."""
    tenure: Optional[int] = None
    max_iterations: Optional[int] = None
    restarts: int = DEFAULT_TABU_RESTARTS
    seed: int = 0

    def validate(self) -> List[str]:
        errors = []
        if self.tenure is not None and self.tenure < 0:
            errors.append(f"tenure must be >= 0, got {self.tenure}")
        if self.max_iterations is not None and self.max_iterations < 1:
            errors.append(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.restarts < 1:
            errors.append(f"restarts must be >= 1, got {self.restarts}")
        return errors

    def resolve(self, n: int) -> tuple[int, int]:
        """(tenure, iterations) for an N-variable model."""
        if self.tenure is not None:
            tenure = self.tenure
        else:
            tenure = min(max(7, n // 10), max(1, n // 4))
        # A tenure of N or more would leave no legal move.
        tenure = min(tenure, max(0, n - 1))
        iterations = self.max_iterations if self.max_iterations is not None else max(500, 20 * n)
        return tenure, iterations


def _swap_moves(x: np.ndarray, h: np.ndarray, indptr: np.ndarray, indices: np.ndarray,
                data: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Energy change of turning off a set bit and turning on a coupled unset bit.

    Returns (off, on, delta) arrays, one entry per coupled pair.
    """
    set_bits = np.flatnonzero(x)
    starts = indptr[set_bits]
    counts = indptr[set_bits + 1] - starts
    total = int(counts.sum())
    if total == 0:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty, np.zeros(0)
    # Flattened CSR positions of every row in set_bits.
    pos = np.arange(total) + np.repeat(starts - (np.cumsum(counts) - counts), counts)
    off = np.repeat(set_bits, counts)
    on = indices[pos]
    w = data[pos]
    keep = x[on] == 0
    off, on, w = off[keep], on[keep], w[keep]
    return off, on, h[on] - h[off] - w


def _tabu_walk(m: QuboModel, tenure: int, iterations: int, rng: np.random.Generator,
               stop_at: Optional[float] = None) -> tuple[np.ndarray, float]:
    W = m.couplings
    indptr, indices, data = W.indptr, W.indices, W.data
    x = rng.integers(0, 2, size=m.n).astype(np.int64)
    h = m.local_fields(x.astype(float))
    e = qubo_mod.energy(m, x)
    best_x, best_e = x.copy(), e
    free_at = np.zeros(m.n, dtype=np.int64)

    def flip(i: int) -> None:
        x[i] ^= 1
        lo, hi = indptr[i], indptr[i + 1]
        if x[i]:
            h[indices[lo:hi]] += data[lo:hi]
        else:
            h[indices[lo:hi]] -= data[lo:hi]
        free_at[i] = it + tenure + 1

    for it in range(iterations):
        deltas = np.where(x == 0, h, -h)
        allowed = (free_at <= it) | (e + deltas < best_e - 1e-12)
        masked = np.where(allowed, deltas, np.inf)
        i = int(np.argmin(masked))
        move = masked[i]

        off, on, pair_deltas = _swap_moves(x, h, indptr, indices, data)
        pair = -1
        if off.size:
            pair_allowed = ((free_at[off] <= it) & (free_at[on] <= it)) | (e + pair_deltas < best_e - 1e-12)
            pair_masked = np.where(pair_allowed, pair_deltas, np.inf)
            k = int(np.argmin(pair_masked))
            if pair_masked[k] < move:
                pair, move = k, pair_masked[k]

        if pair >= 0:
            flip(int(off[pair]))
            flip(int(on[pair]))
        else:
            if not np.isfinite(move):
                i = int(np.argmin(deltas))
                move = deltas[i]
            flip(i)
        e += move
        if e < best_e - 1e-12:
            best_e = e
            best_x = x.copy()
        if (it + 1) % max(1, m.n) == 0:
            h = m.local_fields(x.astype(float))
            e = qubo_mod.energy(m, x)
            if stop_at is not None and time.perf_counter() > stop_at:
                break
    return best_x, qubo_mod.energy(m, best_x)


def tabu_qubo(m: QuboModel, params: TabuParams = TabuParams(),
              time_limit_s: Optional[float] = None) -> tuple[np.ndarray, float]:
    """Steepest-descent tabu search with a tabu list and new-best aspiration.

    Each step takes the best of all single flips and all swaps (one set bit
    off, one coupled unset bit on). Recently flipped variables may not flip
    back for ``tenure`` iterations unless doing so gives a new best energy.
    Best of ``restarts`` random starts; a restart that would overrun
    ``time_limit_s`` is not started and a running walk stops at the
    deadline. Deterministic for a given ``params.seed`` when no limit cuts
    it short.

    Returns:
        (bit vector, its energy).
    """
    errors = params.validate()
    if errors:
        raise ValueError("; ".join(errors))
    if m.n == 0:
        return np.zeros(0, dtype=np.int64), float(m.offset)
    tenure, iterations = params.resolve(m.n)
    start = time.perf_counter()
    stop_at = deadline(start, time_limit_s)
    best_x, best_e = None, math.inf
    for k, rng in enumerate(restart_rngs(params.seed, params.restarts)):
        if not restart_fits(start, k, time_limit_s):
            logger.warning(f"[TABU] Time limit reached after {k} of {params.restarts} restarts")
            break
        x, e = _tabu_walk(m, tenure, iterations, rng, stop_at)
        if e < best_e - 1e-12:
            best_x, best_e = x, e
        logger.debug(f"[TABU] restart {k}: energy={e:.9g} best={best_e:.9g}")
    return best_x, best_e


@register_solver
class TabuSolver(MasterSolver):
    """QUBO tabu search followed by greedy repair."""

    name = "tabu"

    def tabu_params(self, seed: int) -> TabuParams:
        return TabuParams(
            tenure=self.params.get("tenure"),
            max_iterations=self.params.get("max_iterations"),
            restarts=self.params.get("restarts", DEFAULT_TABU_RESTARTS),
            seed=component_seed(seed, "tabu"),
        )

    def validate(self) -> List[str]:
        return self.tabu_params(0).validate()

    def solve(self, pool: ColumnPool, dinst: DiscretizedInstance, seed: int = 0,
              time_limit_s: Optional[float] = None) -> MasterSolution:
        start = time.perf_counter()
        model = qubo_mod.build(pool, dinst, penalty_weight=self.params.get("penalty_weight"),
                               include_uncovered=self.params.get("include_uncovered", True))
        x, energy = tabu_qubo(model, self.tabu_params(seed), remaining(start, time_limit_s))
        repaired = greedy_repair(pool, dinst, x, self.provenance(seed))
        solution = no_worse_than_trivial(repaired, pool, dinst)
        if solution is not repaired:
            energy = qubo_mod.energy(model, qubo_mod.solution_bits(model, solution.columns, solution.uncovered))
        solution.energy = energy
        solution.wall_s = time.perf_counter() - start
        logger.info(f"[TABU] energy={energy:.9g} repaired cost={solution.cost:.9g}")
        return solution
