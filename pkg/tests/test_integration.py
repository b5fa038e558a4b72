"""
Integration tests for evfleet - whole pipeline on generated instance families.

Run with: pytest tests/test_integration.py -v -m integration

These tests solve a few hundred small instances and one fleet-sized one;
expect several minutes.
"""

import math
import time

import dimod
import numpy as np
import pytest

from conftest import tiny_instance
from evfleet.core import constants, generator, qubo
from evfleet.core.colgen import ColumnPool
from evfleet.core.master import get_solver, greedy_repair
from evfleet.core.master.base import check_feasibility
from evfleet.core.oracle import cross_validate
from evfleet.core.pipeline import SolveOptions, generate_columns, solve_instance, solve_master
from evfleet.core.status import StatusManager
from evfleet.storage.models import discretize

pytestmark = pytest.mark.integration

FAMILY = [(seed, 2, 3) for seed in range(30)] + [(seed, 1, 4) for seed in range(30, 50)]


@pytest.fixture(scope="module")
def stages():
    """Column generation on the tiny family, shared by the solver checks."""
    return [generate_columns(tiny_instance(seed, n, r), SolveOptions(), StatusManager())
            for seed, n, r in FAMILY[:20]]


class TestOracleEquivalence:
    """Assignment enumeration and all-paths set partitioning agree."""

    @pytest.mark.timeout(600)
    def test_family(self):
        for seed, n, r in FAMILY:
            check = cross_validate(discretize(tiny_instance(seed, n, r)))
            assert math.isclose(check.oracle.cost, check.master.cost, abs_tol=1e-6), seed


class TestBounds:
    """lp_bound <= oracle <= exact master over the generated pool."""

    @pytest.mark.timeout(600)
    def test_sandwich(self):
        for seed, n, r in FAMILY[:25]:
            inst = tiny_instance(seed, n, r)
            outcome = solve_instance(inst, SolveOptions(), StatusManager())
            optimum = cross_validate(discretize(inst)).oracle.cost
            assert outcome.colgen.report.status.value == "converged"
            assert outcome.lp_bound <= optimum + 1e-6, seed
            assert optimum <= outcome.solution.cost + 1e-6, seed

    @pytest.mark.timeout(900)
    def test_root_pool_mostly_closes_gap(self):
        closed = 0
        for seed, n, r in FAMILY:
            inst = tiny_instance(seed, n, r)
            outcome = solve_instance(inst, SolveOptions(), StatusManager())
            check = cross_validate(discretize(inst))
            closed += math.isclose(outcome.solution.cost, check.oracle.cost, abs_tol=1e-6)
        assert closed >= 0.8 * len(FAMILY), closed

    @pytest.mark.timeout(600)
    def test_all_columns_is_exact(self):
        for seed, n, r in FAMILY[:10]:
            inst = tiny_instance(seed, n, r)
            outcome = solve_instance(inst, SolveOptions(all_columns=True), StatusManager())
            optimum = cross_validate(discretize(inst)).oracle.cost
            assert math.isclose(outcome.solution.cost, optimum, abs_tol=1e-6), seed


class TestHeuristics:
    """Master heuristics at default settings on pools small enough to enumerate."""

    RUNS = 100

    @pytest.mark.timeout(900)
    @pytest.mark.parametrize("solver", ["sa", "tabu", "feasible-anneal"])
    def test_hundred_seeded_runs(self, stages, solver):
        small = [stage for stage in stages if qubo.build(stage.colgen.pool, stage.dinst).n <= 16]
        assert small
        optima = [solve_master(stage, "exact", SolveOptions()).cost for stage in small]
        hits = 0
        for seed in range(self.RUNS):
            k = seed % len(small)
            start = time.perf_counter()
            solution = solve_master(small[k], solver, SolveOptions(solver=solver, seed=seed))
            wall = time.perf_counter() - start
            assert solution.feasible
            assert wall < 1.0, (seed, wall)
            assert solution.cost >= optima[k] - 1e-9
            hits += math.isclose(solution.cost, optima[k], abs_tol=1e-9)
        assert hits >= 0.95 * self.RUNS, hits

class TestQuboCorrectness:
    """The QUBO ground state is the master optimum."""

    @pytest.mark.timeout(600)
    def test_ground_state(self, stages):
        checked = 0
        for stage in stages:
            pool, dinst = stage.colgen.pool, stage.dinst
            model = qubo.build(pool, dinst)
            if model.n > 16:
                continue
            sampleset = dimod.ExactSolver().sample(model.to_bqm())
            best = sampleset.first
            x = [best.sample[i] for i in range(model.n)]
            exact = get_solver("exact").solve(pool, dinst)
            assert qubo.is_feasible(model, x)
            assert math.isclose(best.energy, exact.cost, abs_tol=1e-6)
            checked += 1
        assert checked > 0


class TestRepair:
    """Repair never returns an infeasible solution."""

    def test_random_vectors(self, stages):
        rng = np.random.default_rng(11)
        for k in range(1000):
            stage = stages[k % len(stages)]
            pool, dinst = stage.colgen.pool, stage.dinst
            x = rng.integers(0, 2, size=len(pool) + dinst.n_reservations)
            solution = greedy_repair(pool, dinst, x)
            assert check_feasibility(solution, pool, dinst) == []


class TestScale:
    """Fleet-sized instance end to end at default settings."""

    @pytest.mark.timeout(900)
    def test_fleet_instance(self):
        inst = generator.generate(2024, 20, 160, 96, "day-night")
        start = time.perf_counter()
        outcome = solve_instance(inst, SolveOptions(solver="sa", seed=1), StatusManager())
        wall = time.perf_counter() - start
        assert wall < constants.DEFAULT_SOLVE_BUDGET_S, wall
        assert outcome.solution.feasible
        assert outcome.solution.cost <= outcome.dinst.all_trivial_cost() + 1e-6
        assert len(outcome.solution.columns) == 20
        pool: ColumnPool = outcome.colgen.pool
        assert len(pool) >= 20
