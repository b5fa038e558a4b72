"""Benchmark harness: a seeded instance family solved by every master solver.

Instances run concurrently (an asyncio semaphore bounds the number of
worker threads); rows are sorted afterwards so the CSV does not depend on
completion order.
"""

from dataclasses import dataclass, field, replace
from typing import Callable, Optional
import asyncio
import logging
import time

import pandas as pd

from . import constants, generator
from .pipeline import SolveOptions, generate_columns, solve_master
from .reports import bench_frame
from .seeds import component_seed
from .status import StatusManager, get_status_manager
from ..storage.models import Instance

logger = logging.getLogger(__name__)


@dataclass
class BenchCase:
    label: str
    seed: int
    instance: Instance


@dataclass
class BenchSpec:
    """What to run: scales x instances per scale, each with every solver."""
    scales: list[tuple[int, int]] = field(default_factory=lambda: [(1, 4)])
    instances_per_scale: int = 10
    t_max: int = 16
    seed: int = 0
    solvers: list[str] = field(default_factory=lambda: ["exact", "sa", "tabu", "feasible-anneal"])
    profile: str = generator.PriceProfile.DAY_NIGHT.value
    generator_params: dict = field(default_factory=dict)
    options: SolveOptions = field(default_factory=SolveOptions)

    def validate(self) -> list[str]:
        errors = []
        if not self.scales:
            errors.append("at least one (n, r_max) scale is required")
        if self.instances_per_scale < 1:
            errors.append(f"instances_per_scale must be >= 1, got {self.instances_per_scale}")
        if not self.solvers:
            errors.append("at least one solver is required")
        return errors

    def cases(self) -> list[BenchCase]:
        """Generate the instance family; instance seeds are split from ``seed``."""
        cases = []
        index = 0
        for n, r_max in self.scales:
            for k in range(self.instances_per_scale):
                instance_seed = component_seed(self.seed, "bench", index)
                index += 1
                inst = generator.generate(instance_seed, n, r_max, self.t_max, self.profile,
                                          **self.generator_params)
                cases.append(BenchCase(f"n{n}_r{r_max}_t{self.t_max}_{k:03d}", instance_seed, inst))
        return cases


def run_case(case: BenchCase, solvers: list[str], options: SolveOptions) -> list[dict]:
    """Column generation once, then every solver on the same pool."""
    stage = generate_columns(case.instance, options, StatusManager())
    rows = []
    for name in solvers:
        start = time.perf_counter()
        solution = solve_master(stage, name, replace(options, solver=name, seed=case.seed))
        rows.append({
            "instance": case.label,
            "seed": case.seed,
            "n": stage.dinst.n_vehicles,
            "r_max": stage.dinst.n_reservations,
            "t_max": stage.dinst.t_max,
            "solver": name,
            "cost": solution.cost,
            "lp_bound": stage.colgen.report.lp_objective,
            "feasible": solution.feasible,
            "wall_s": time.perf_counter() - start,
        })
    return rows


class BenchRunner:
    """Runs a :class:`BenchSpec` with bounded concurrency.

    Example:
        runner = BenchRunner(spec, workers=4)
        df = asyncio.run(runner.run())
    """

    def __init__(
        self,
        spec: BenchSpec,
        workers: int = 4,
        status: Optional[StatusManager] = None,
        on_case_complete: Optional[Callable[[BenchCase, list[dict]], None]] = None,
    ):
        errors = spec.validate()
        if errors:
            raise ValueError("; ".join(errors))
        self.spec = spec
        self.workers = max(1, workers)
        self.status = status or get_status_manager()
        self.on_case_complete = on_case_complete
        self._completed = 0

    async def run(self) -> pd.DataFrame:
        """Solve every case; returns the bench frame (with gaps), sorted.

        Raises:
            RuntimeError: If any case failed (after all cases have finished).
        """
        solvers = list(self.spec.solvers)
        if "exact" not in solvers:
            solvers.insert(0, "exact")   # gaps are relative to the exact master
            logger.info("[BENCH] Added exact as the gap reference")
        cases = self.spec.cases()
        logger.info(f"[BENCH] {len(cases)} instances x {len(solvers)} solvers, {self.workers} workers")
        self.status.start_operation("Benchmark", len(cases))
        semaphore = asyncio.Semaphore(self.workers)
        self._completed = 0

        async def run_with_semaphore(case: BenchCase) -> list[dict]:
            async with semaphore:
                rows = await asyncio.to_thread(run_case, case, solvers, self.spec.options)
                self._completed += 1
                self.status.progress("bench", f"{case.label} done", self._completed / len(cases))
                if self.on_case_complete:
                    self.on_case_complete(case, rows)
                return rows

        results = await asyncio.gather(*(run_with_semaphore(case) for case in cases), return_exceptions=True)

        rows, failures = [], []
        for case, result in zip(cases, results):
            if isinstance(result, BaseException):
                logger.error(f"[BENCH] {case.label} failed: {result}")
                failures.append(case.label)
            else:
                rows.extend(result)
        self.status.end_operation(success=not failures)
        if failures:
            raise RuntimeError(f"{len(failures)} bench instance(s) failed: {', '.join(failures)}")
        return bench_frame(rows)


def default_scales() -> list[tuple[int, int]]:
    return list(constants.BENCH_SCALES)
