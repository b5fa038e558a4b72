"""Machine-readable run reports: CSV (appended), solution JSON and bench workbook."""

from pathlib import Path
from typing import Any, Optional
import json
import logging

import pandas as pd

from .master.base import SUMMARY_COLUMNS
from .pipeline import SolveOutcome

logger = logging.getLogger(__name__)

COLGEN_CSV = "colgen.csv"
SOLVER_CSV = "solver.csv"
BENCH_CSV = "bench.csv"
BENCH_XLSX = "bench.xlsx"
BENCH_COLUMNS = ["instance", "seed", "n", "r_max", "t_max", "solver", "cost", "gap_vs_exact", "lp_bound",
                 "feasible", "wall_s"]
INSTANCE_COLUMNS = ["instance", "n", "r_max", "t_max"]


def append_frame(df: pd.DataFrame, path: Path) -> Path:
    """Append rows to a CSV, writing the header only when the file is new or empty."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    exists = path.exists() and path.stat().st_size > 0
    df.to_csv(path, mode="a" if exists else "w", header=not exists, index=False)
    return path


def solver_summary(outcome: SolveOutcome, instance_label: str) -> pd.DataFrame:
    """One-row solver run summary."""
    row = {
        "instance": instance_label,
        "n": outcome.dinst.n_vehicles,
        "r_max": outcome.dinst.n_reservations,
        "t_max": outcome.dinst.t_max,
        **outcome.solution.summary_row(),
    }
    return pd.DataFrame([row], columns=INSTANCE_COLUMNS + SUMMARY_COLUMNS)


def solution_document(outcome: SolveOutcome, instance_label: Optional[str]) -> dict:
    """Solution JSON document."""
    report = outcome.colgen.report
    return {
        "instance": instance_label,
        "lp_bound": report.lp_objective,
        "colgen": {
            "status": report.status.value,
            "iterations": report.iterations,
            "pool_size": len(outcome.colgen.pool),
        },
        **outcome.solution.to_dict(outcome.colgen.pool),
    }


def write_json(document: Any, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    return path


def solution_filename(solver: str, seed: int) -> str:
    return f"solution_{solver}_seed{seed}.json"


def write_solve_reports(outcome: SolveOutcome, out_dir: Path, instance_label: str) -> dict[str, Path]:
    """Write the solution JSON and append to the colgen and solver CSVs."""
    out_dir = Path(out_dir)
    provenance = outcome.solution.provenance
    paths = {
        "solution": write_json(solution_document(outcome, instance_label),
                               out_dir / solution_filename(provenance.solver, provenance.seed or 0)),
        "colgen": append_frame(outcome.colgen.report.to_dataframe(), out_dir / COLGEN_CSV),
        "solver": append_frame(solver_summary(outcome, instance_label), out_dir / SOLVER_CSV),
    }
    logger.info(f"Wrote reports to {out_dir}")
    return paths


def bench_frame(rows: list[dict]) -> pd.DataFrame:
    """Bench rows with exact-relative gaps, sorted by instance then solver."""
    df = pd.DataFrame(rows, columns=[c for c in BENCH_COLUMNS if c != "gap_vs_exact"])
    if df.empty:
        return pd.DataFrame(columns=BENCH_COLUMNS)
    exact = df[df["solver"] == "exact"].set_index("instance")["cost"]
    reference = df["instance"].map(exact)
    gap = (df["cost"] - reference) / reference.abs().where(reference.abs() > 0, 1.0)
    gap = gap.where(df["solver"] != "exact", 0.0)
    df.insert(BENCH_COLUMNS.index("gap_vs_exact"), "gap_vs_exact", gap)
    return df.sort_values(["instance", "solver"], kind="stable").reset_index(drop=True)


def _create_metadata_df(metadata: dict) -> pd.DataFrame:
    """Create a DataFrame from a metadata dictionary for export."""
    if not metadata:
        return pd.DataFrame({'Parameter': ['No metadata available'], 'Value': ['']})
    return pd.DataFrame([{'Parameter': k, 'Value': str(v)} for k, v in metadata.items()])


def write_bench_xlsx(df: pd.DataFrame, path: Path, metadata: Optional[dict] = None) -> Path:
    """Workbook with a per-(n, r_max, solver) gap summary, the raw runs and a metadata sheet."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    summary = (
        df.groupby(["n", "r_max", "solver"], sort=True)
        .agg(instances=("instance", "count"), mean_gap=("gap_vs_exact", "mean"),
             max_gap=("gap_vs_exact", "max"), mean_wall_s=("wall_s", "mean"))
        .reset_index()
    )
    with pd.ExcelWriter(path, engine='xlsxwriter') as writer:
        summary.to_excel(writer, sheet_name='Summary', index=False)
        df.to_excel(writer, sheet_name='Runs', index=False)
        _create_metadata_df(metadata or {}).to_excel(writer, sheet_name='Metadata', index=False)
    logger.info(f"Wrote bench workbook {path}")
    return path
