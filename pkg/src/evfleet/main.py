"""evfleet - command-line entry point.

Subcommands: generate, solve, oracle, export-qubo, bench. Reports go to
``--out``; stdout carries a single summary line per run.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence
import argparse
import asyncio
import logging
import sys

from . import __version__
from .core import generator, qubo
from .core.bench import BenchRunner, BenchSpec, default_scales
from .core.colgen import ColgenLimits
from .core.config import ConfigManager
from .core.master import list_solvers
from .core.oracle import OracleScaleError, cross_validate, solve_oracle
from .core.pipeline import InfeasibleSolutionError, SolveOptions, Stage, StageError, generate_columns, \
    run_stage, solve_instance
from .core.reports import BENCH_CSV, BENCH_XLSX, append_frame, write_bench_xlsx, write_json, \
    write_solve_reports
from .core.status import StatusEvent, get_status_manager
from .storage.instance_io import read_instance, write_instance
from .storage.models import discretize

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2
U64_MAX = 2 ** 64 - 1


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value <= U64_MAX:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {value}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def _scales(text: str) -> list[tuple[int, int]]:
    """``reference`` or a comma list of ``<n>x<r_max>``."""
    if text == "reference":
        return default_scales()
    scales = []
    for item in text.split(","):
        try:
            n, r_max = item.lower().split("x")
            scales.append((int(n), int(r_max)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad scale {item!r}, expected <n>x<r_max>") from None
    return scales


@dataclass
class RunConfig:
    """Validated command settings (argparse namespace + config file)."""
    command: str
    seed: int
    out: Path
    time_limit_s: Optional[float]
    args: argparse.Namespace = field(repr=False)

    def validate(self) -> list[str]:
        errors = []
        a = self.args
        for name in ("vehicles", "t_max", "instances", "workers", "path_limit", "max_iterations",
                     "max_assignments", "levels", "charge_levels"):
            value = getattr(a, name, None)
            if value is not None and value < 1:
                errors.append(f"--{name.replace('_', '-')} must be >= 1, got {value}")
        if getattr(a, "reservations", None) is not None and a.reservations < 0:
            errors.append(f"--reservations must be >= 0, got {a.reservations}")
        return errors


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--seed", type=_seed, default=0, help="master seed (u64)")
    shared.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    shared.add_argument("--time-limit-s", type=_positive_float, default=None, help="wall-time budget")
    shared.add_argument("--config", type=Path, default=None, help="config JSON (default ~/.evfleet/config.json)")
    shared.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="stderr log level")

    gen_opts = argparse.ArgumentParser(add_help=False)
    gen_opts.add_argument("--t-max", type=int, default=32)
    gen_opts.add_argument("--profile", choices=[p.value for p in generator.PriceProfile], default="day-night")
    gen_opts.add_argument("--e-cap", type=_positive_float, default=None)
    gen_opts.add_argument("--levels", type=int, default=None, help="energy levels (delta_e = e_cap / levels)")
    gen_opts.add_argument("--charge-levels", type=int, default=None, help="levels gained per charging step")
    gen_opts.add_argument("--dt-hours", type=_positive_float, default=None)
    gen_opts.add_argument("--alpha", type=_positive_float, default=None)
    gen_opts.add_argument("--c-uncov", type=_positive_float, default=None)
    gen_opts.add_argument("--max-duration", type=int, default=None)

    colgen_opts = argparse.ArgumentParser(add_help=False)
    colgen_opts.add_argument("--all-columns", action="store_true", help="seed the pool with every path")
    colgen_opts.add_argument("--path-limit", type=int, default=None)
    colgen_opts.add_argument("--pivot-rule", choices=["bland", "dantzig"], default=None)
    colgen_opts.add_argument("--max-iterations", type=int, default=None)
    colgen_opts.add_argument("--reduced-cost-tol", type=float, default=None)

    solver_opts = argparse.ArgumentParser(add_help=False)
    solver_opts.add_argument("--penalty-weight", type=_positive_float, default=None)
    solver_opts.add_argument("--no-uncovered-vars", action="store_true",
                             help="drop y variables from the QUBO (at-most-one penalties)")
    solver_opts.add_argument("--sa-sweeps", type=int, default=None)
    solver_opts.add_argument("--sa-restarts", type=int, default=None)
    solver_opts.add_argument("--tabu-tenure", type=int, default=None)
    solver_opts.add_argument("--tabu-iterations", type=int, default=None)
    solver_opts.add_argument("--tabu-restarts", type=int, default=None)
    solver_opts.add_argument("--fa-sweeps", type=int, default=None)
    solver_opts.add_argument("--fa-restarts", type=int, default=None)

    parser = argparse.ArgumentParser(prog="evfleet", description="EV fleet charging and allocation solvers")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[shared, gen_opts], help="write a random instance")
    p.add_argument("--vehicles", type=int, required=True)
    p.add_argument("--reservations", type=int, required=True)
    p.add_argument("--output", type=Path, default=None, help="instance path (default <out>/instance_<seed>.json)")

    p = sub.add_parser("solve", parents=[shared, colgen_opts, solver_opts], help="colgen + master solver")
    p.add_argument("instance", type=Path)
    p.add_argument("--solver", choices=list_solvers(), default="exact")

    p = sub.add_parser("oracle", parents=[shared], help="exact reference optimum")
    p.add_argument("instance", type=Path)
    p.add_argument("--max-assignments", type=int, default=None)
    p.add_argument("--cross-check", action="store_true", help="also compare against all-paths + exact master")
    p.add_argument("--path-limit", type=int, default=None)

    p = sub.add_parser("export-qubo", parents=[shared, colgen_opts], help="colgen, then write the master QUBO")
    p.add_argument("instance", type=Path)
    p.add_argument("--penalty-weight", type=_positive_float, default=None)
    p.add_argument("--no-uncovered-vars", action="store_true")
    p.add_argument("--output", type=Path, default=None, help="QUBO path (default <out>/master.qubo)")

    p = sub.add_parser("bench", parents=[shared, gen_opts, colgen_opts, solver_opts],
                       help="seeded instance family x solvers")
    p.add_argument("--scales", type=_scales, default=[(1, 4), (2, 4), (3, 6)],
                   help="'reference' or comma list like 1x4,2x8")
    p.add_argument("--instances", type=int, default=10, help="instances per scale")
    p.add_argument("--solvers", default=",".join(list_solvers()),
                   help="comma list of solvers; exact is always added as the gap reference")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--xlsx", action="store_true", help="also write bench.xlsx")
    p.set_defaults(t_max=16)
    return parser


class App:
    """Runs one CLI command."""

    def __init__(self, run: RunConfig):
        self.run = run
        self.args = run.args
        self.config = ConfigManager(config_file=run.args.config)
        self.status = get_status_manager()
        self.status.add_listener(self._forward_status)
        self._apply_overrides()

    @staticmethod
    def _forward_status(event: StatusEvent) -> None:
        logger.info(event.format_message())

    def _apply_overrides(self) -> None:
        a = self.args
        self.config.override(
            e_cap=getattr(a, "e_cap", None),
            dt_hours=getattr(a, "dt_hours", None),
            levels=getattr(a, "levels", None),
            charge_levels=getattr(a, "charge_levels", None),
            alpha=getattr(a, "alpha", None),
            c_uncov=getattr(a, "c_uncov", None),
            colgen_max_iterations=getattr(a, "max_iterations", None),
            reduced_cost_tol=getattr(a, "reduced_cost_tol", None),
            lp_pivot_rule=getattr(a, "pivot_rule", None),
            path_limit=getattr(a, "path_limit", None),
            sa_sweeps=getattr(a, "sa_sweeps", None),
            sa_restarts=getattr(a, "sa_restarts", None),
            tabu_max_iterations=getattr(a, "tabu_iterations", None),
            tabu_restarts=getattr(a, "tabu_restarts", None),
            fa_sweeps=getattr(a, "fa_sweeps", None),
            fa_restarts=getattr(a, "fa_restarts", None),
            oracle_max_assignments=getattr(a, "max_assignments", None),
            bench_workers=getattr(a, "workers", None),
        )

    # ------------------------------------------------------------------
    # Option assembly
    # ------------------------------------------------------------------

    def generator_params(self) -> dict:
        c = self.config
        return {
            "e_cap": float(c.get("e_cap")),
            "levels": int(c.get("levels")),
            "charge_levels": int(c.get("charge_levels")),
            "dt_hours": float(c.get("dt_hours")),
            "alpha": float(c.get("alpha")),
            "c_uncov": float(c.get("c_uncov")),
            "max_duration": getattr(self.args, "max_duration", None),
        }

    def solve_options(self, solver: str = "exact") -> SolveOptions:
        c = self.config
        a = self.args
        include_uncovered = not getattr(a, "no_uncovered_vars", False)
        penalty = getattr(a, "penalty_weight", None)
        return SolveOptions(
            solver=solver,
            seed=self.run.seed,
            time_limit_s=self.run.time_limit_s,
            budget_s=c.solve_budget_s,
            all_columns=getattr(a, "all_columns", False),
            path_limit=c.path_limit,
            limits=ColgenLimits(
                max_iterations=int(c.get("colgen_max_iterations")),
                max_wall_s=float(c.get("colgen_max_wall_s")),
                reduced_cost_tol=c.reduced_cost_tol,
                pivot_rule=c.lp_pivot_rule,
            ),
            solver_params={
                "exact": {"time_limit_s": c.get("exact_time_limit_s")},
                "sa": {"sweeps": c.get("sa_sweeps"), "restarts": c.get("sa_restarts"),
                       "penalty_weight": penalty, "include_uncovered": include_uncovered},
                "tabu": {"tenure": getattr(a, "tabu_tenure", None), "max_iterations": c.get("tabu_max_iterations"),
                         "restarts": c.get("tabu_restarts"), "penalty_weight": penalty,
                         "include_uncovered": include_uncovered},
                "feasible-anneal": {"sweeps": c.get("fa_sweeps"), "restarts": c.get("fa_restarts")},
            },
        )

    def load(self):
        return run_stage(Stage.LOAD, read_instance, self.args.instance)

    # ------------------------------------------------------------------
    # Commands
    # ------------------------------------------------------------------

    def cmd_generate(self) -> int:
        a = self.args
        inst = generator.generate(self.run.seed, a.vehicles, a.reservations, a.t_max, a.profile,
                                  **self.generator_params())
        path = a.output or self.run.out / f"instance_{self.run.seed}.json"
        write_instance(inst, path)
        print(f"{path} {inst.summary()}")
        return EXIT_OK

    def cmd_solve(self) -> int:
        a = self.args
        inst = self.load()
        outcome = solve_instance(inst, self.solve_options(a.solver), self.status)
        run_stage(Stage.REPORT, write_solve_reports, outcome, self.run.out, str(a.instance))
        s = outcome.solution
        print(f"solver={a.solver} cost={s.cost:.6f} lp_bound={outcome.lp_bound:.6f} "
              f"colgen={outcome.colgen.report.status.value} feasible={s.feasible}")
        return EXIT_OK

    def cmd_oracle(self) -> int:
        a = self.args
        inst = self.load()
        dinst = run_stage(Stage.DISCRETIZE, discretize, inst)
        limit = int(self.config.get("oracle_max_assignments"))
        if a.cross_check:
            check = cross_validate(dinst, limit, self.config.path_limit)
            result = check.oracle
        else:
            result = solve_oracle(dinst, limit)
        run_stage(Stage.REPORT, write_json, {"instance": str(a.instance), **result.to_dict()},
                  self.run.out / f"oracle_{a.instance.stem}.json")
        assignment = ",".join("-" if v is None else str(v) for v in result.assignment)
        checked = " cross_check=ok" if a.cross_check else ""
        print(f"oracle cost={result.cost:.6f} assignment=[{assignment}]{checked}")
        return EXIT_OK

    def cmd_export_qubo(self) -> int:
        a = self.args
        inst = self.load()
        stage = generate_columns(inst, self.solve_options(), self.status)
        model = qubo.build(stage.colgen.pool, stage.dinst, penalty_weight=a.penalty_weight,
                           include_uncovered=not a.no_uncovered_vars)
        path = a.output or self.run.out / "master.qubo"

        def write() -> Path:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_bytes(qubo.export(model))
            return path

        run_stage(Stage.REPORT, write)
        print(f"{path} N={model.n} nonzeros={len(model.coefficients)} M={model.penalty_weight:.6g}")
        return EXIT_OK

    def cmd_bench(self) -> int:
        a = self.args
        solvers = [s.strip() for s in a.solvers.split(",") if s.strip()]
        unknown = [s for s in solvers if s not in list_solvers()]
        if unknown:
            raise ValueError(f"unknown solver(s): {', '.join(unknown)}")
        spec = BenchSpec(
            scales=a.scales, instances_per_scale=a.instances, t_max=a.t_max, seed=self.run.seed,
            solvers=solvers, profile=a.profile, generator_params=self.generator_params(),
            options=self.solve_options(),
        )
        runner = BenchRunner(spec, workers=self.config.bench_workers, status=self.status)
        df = asyncio.run(runner.run())
        csv_path = run_stage(Stage.REPORT, append_frame, df, self.run.out / BENCH_CSV)
        if a.xlsx:
            metadata = {"seed": self.run.seed, "t_max": a.t_max, "instances_per_scale": a.instances,
                        "scales": a.scales, "solvers": ",".join(solvers), "version": __version__}
            run_stage(Stage.REPORT, write_bench_xlsx, df, self.run.out / BENCH_XLSX, metadata)
        print(f"{csv_path} rows={len(df)} instances={df['instance'].nunique()}")
        return EXIT_OK

    def execute(self) -> int:
        handler = getattr(self, "cmd_" + self.run.command.replace("-", "_"))
        return handler()


def main(argv: Optional[Sequence[str]] = None) -> int:
    """CLI entry point. Returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    run = RunConfig(command=args.command, seed=args.seed, out=args.out,
                    time_limit_s=args.time_limit_s, args=args)
    errors = run.validate()
    if errors:
        parser.error("; ".join(errors))

    app = None
    try:
        app = App(run)
        return app.execute()
    except StageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE if isinstance(e.cause, InfeasibleSolutionError) else EXIT_ERROR
    except OracleScaleError as e:
        print(f"error: oracle: {e}", file=sys.stderr)
        return EXIT_ERROR
    except (ValueError, RuntimeError, OSError, KeyError) as e:
        print(f"error: {run.command}: {e}", file=sys.stderr)
        return EXIT_ERROR
    finally:
        if app is not None:
            app.status.remove_listener(app._forward_status)


if __name__ == "__main__":
    sys.exit(main())
