"""Experiment driver and bit-stable report emission.

CSV floats are written in fixed 17-significant-digit scientific notation so
that identical runs give identical bytes on every platform. Wall-clock
quantities are kept out of the CSV files for the same reason; they live in
``timing.json`` and in ``summary.json``.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import Case, ExperimentConfig
from .engine import (COST_MONOTONE_TOL, InitialTrajectoryError, InvariantViolation, IterationInfeasible,
                     RunResult, run_learning)
from .oracle import OracleError, error_metrics, solve_clqr

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT, EXIT_INFEASIBLE = 0, 1, 2, 3

ITERATION_COLUMNS = ("case", "j", "iteration_cost", "t_j", "mean_solve_time_ms", "max_lyapunov_residual")
CONVERGENCE_COLUMNS = ("case", "x_S", "N", "sigma_bar", "delta_j_percent", "iterations_to_steady_state",
                       "final_cost", "oracle_cost", "status")
# columns that depend on the clock and are therefore omitted from the CSV files
TIMED_COLUMNS = ("mean_solve_time_ms",)


def fmt_float(v) -> str:
    """17 significant digits, scientific; non-finite values spelled ``nan``/``inf``/``-inf``."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.16e}"


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return fmt_float(v)
    if isinstance(v, (list, tuple)):
        return " ".join(_cell(x) for x in v)
    return str(v)


def _json_float(v):
    # JSON has no nan/inf; spell them as strings and decode symmetrically
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else fmt_float(v)


def _from_json_float(v):
    return None if v is None else float(v)


@dataclass
class ReportBundle:
    """Tables of one experiment plus its timing blocks and metadata."""

    iteration_table: list[dict] = field(default_factory=list)
    convergence_table: list[dict] = field(default_factory=list)
    timing: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def violations(self) -> list[str]:
        """Iteration-cost increases beyond tolerance, per case."""
        out = []
        last = {}
        for row in self.iteration_table:
            k, c = row["case"], row["iteration_cost"]
            if k in last and c > last[k] + COST_MONOTONE_TOL:
                out.append(f"case {k}: iteration cost rose from {last[k]!r} to {c!r} at j={row['j']}")
            last[k] = c
        return out

    def iterations_csv(self) -> str:
        cols = [c for c in ITERATION_COLUMNS if c not in TIMED_COLUMNS]
        return _csv(cols, self.iteration_table)

    def convergence_csv(self) -> str:
        return _csv(CONVERGENCE_COLUMNS, self.convergence_table)

    def to_dict(self) -> dict:
        def enc(rows):
            return [{k: (_json_float(v) if isinstance(v, float) else v) for k, v in r.items()} for r in rows]
        return {
            "metadata": self.metadata,
            "config": self.config,
            "iteration_table": enc(self.iteration_table),
            "convergence_table": enc(self.convergence_table),
            "timing": self.timing,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "ReportBundle":
        floats = {"iteration_cost", "mean_solve_time_ms", "max_lyapunov_residual", "sigma_bar",
                  "delta_j_percent", "final_cost", "oracle_cost"}

        def dec(rows):
            return [{k: (_from_json_float(v) if k in floats else v) for k, v in r.items()} for r in rows]
        return cls(iteration_table=dec(data["iteration_table"]), convergence_table=dec(data["convergence_table"]),
                   timing=data["timing"], metadata=data["metadata"], config=data["config"])

    @classmethod
    def loads(cls, text: str) -> "ReportBundle":
        return cls.from_dict(json.loads(text))


def _csv(columns, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def _percentile(sorted_vals, q):
    return float(np.percentile(sorted_vals, q)) if len(sorted_vals) else math.nan


def report_timing(result: RunResult | None) -> dict:
    """Wall time, per-step QP solve-time distribution (ms) and QP sizes per iteration."""
    if result is None or not result.reports:
        return {}
    times = [1e3 * t for r in result.reports for t in r.solve_times]
    final = [1e3 * t for t in result.reports[-1].solve_times]
    block = {
        "wall_time_s": result.wall_time,
        "qp_solves": len(times),
        "solve_time_ms": {},
        "final_iteration_median_ms": float(np.median(final)) if final else None,
        "safe_set_size": [r.safe_set_size for r in result.reports],
        "max_qp_dim": [max((s.qp_dim for s in r.steps), default=0) for r in result.reports],
    }
    if times:
        block["solve_time_ms"] = {"min": min(times), "median": float(np.median(times)),
                                  "p99": _percentile(times, 99), "max": max(times)}
    return block


@dataclass
class CaseOutcome:
    case: Case
    status: str
    message: str
    result: RunResult | None
    oracle: object | None
    sigma_bar: float
    delta_j: float

    @property
    def exit_code(self) -> int:
        return {"ok": EXIT_OK, "infeasible": EXIT_INFEASIBLE}.get(self.status, EXIT_INVARIANT)


def run_case(case: Case) -> CaseOutcome:
    """Learning run plus oracle comparison for one (x_S, N) entry; never raises for run failures."""
    t0 = time.perf_counter()
    status, message, result = "ok", "", None
    try:
        result = run_learning(case.run)
    except InvariantViolation as exc:
        status, message, result = "invariant", str(exc), exc.result
    except IterationInfeasible as exc:
        status, message, result = "infeasible", str(exc), exc.result
    except InitialTrajectoryError as exc:
        status, message = "infeasible", str(exc)
    if result is not None and not result.wall_time:
        result.wall_time = time.perf_counter() - t0
    oracle, sigma_bar, delta_j = None, math.nan, math.nan
    try:
        oracle = solve_clqr(case.task, case.oracle_T, case.run.solver)
        if result is not None:
            sigma_bar, delta_j = error_metrics(oracle, result.final_trajectory, case.task.x_F)
    except OracleError as exc:
        if status == "ok":
            status, message = "oracle", str(exc)
    if message:
        log.error("case %d: %s", case.index, message)
    return CaseOutcome(case, status, message, result, oracle, sigma_bar, delta_j)


def run_cases(cases: list[Case], jobs: int = 1) -> list[CaseOutcome]:
    if jobs <= 1 or len(cases) <= 1:
        return [run_case(c) for c in cases]
    with ProcessPoolExecutor(min(jobs, len(cases))) as ex:
        return list(ex.map(run_case, cases))


def build_bundle(config: ExperimentConfig, outcomes: list[CaseOutcome], seed: int = 0) -> ReportBundle:
    bundle = ReportBundle(config=config.data,
                          metadata={"config_hash": config.config_hash, "seed": seed, "version": __version__})
    for oc in outcomes:
        k = oc.case.index
        res = oc.result
        for rep in (res.reports if res else []):
            st = rep.solve_times
            bundle.iteration_table.append({
                "case": k,
                "j": rep.j,
                "iteration_cost": float(rep.iteration_cost),
                "t_j": rep.duration,
                "mean_solve_time_ms": float(1e3 * np.mean(st)) if st else math.nan,
                "max_lyapunov_residual": float(rep.max_lyapunov_residual),
            })
        bundle.convergence_table.append({
            "case": k,
            "x_S": [float(v) for v in oc.case.task.x_S],
            "N": oc.case.task.N,
            "sigma_bar": float(oc.sigma_bar),
            "delta_j_percent": float(oc.delta_j),
            "iterations_to_steady_state": res.steady_state_iteration if res else None,
            "final_cost": float(res.final_trajectory.iteration_cost) if res else math.nan,
            "oracle_cost": float(oc.oracle.cost) if oc.oracle is not None else math.nan,
            "status": oc.status,
        })
        block = {"case": k, "x_S": [float(v) for v in oc.case.task.x_S], "N": oc.case.task.N}
        block.update(report_timing(res))
        bundle.timing.append(block)
    return bundle


def write_outputs(out_dir, bundle: ReportBundle, outcomes: list[CaseOutcome], formats) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def put(path: Path, text: str):
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        written.append(path)

    if "csv" in formats:
        put(out / "iterations.csv", bundle.iterations_csv())
        put(out / "convergence.csv", bundle.convergence_csv())
    if "json" in formats:
        for oc in outcomes:
            k = oc.case.index
            for traj in (oc.result.trajectories if oc.result else []):
                put(out / "trajectories" / f"case{k:02d}_j{traj.iteration_index:04d}.json",
                    json.dumps(traj.to_dict()) + "\n")
            if oc.oracle is not None:
                put(out / "trajectories" / f"case{k:02d}_oracle.json", json.dumps(oc.oracle.to_dict()) + "\n")
        put(out / "summary.json", bundle.dumps())
    put(out / "timing.json", json.dumps(bundle.timing, indent=2, sort_keys=True) + "\n")
    return written


def run_experiment(config: ExperimentConfig, out_dir=None, checkpoint_dir=None, jobs: int = 1,
                   seed: int = 0) -> tuple[int, ReportBundle]:
    """Execute every case of `config`, write all reports and return ``(exit_code, bundle)``."""
    out_dir = out_dir or config.output["directory"]
    if checkpoint_dir is None and config.output["checkpoint"]:
        checkpoint_dir = str(Path(out_dir) / "checkpoints")
    outcomes = run_cases(config.cases(checkpoint_dir), jobs)
    bundle = build_bundle(config, outcomes, seed)
    write_outputs(out_dir, bundle, outcomes, config.output["formats"])
    code = max((oc.exit_code for oc in outcomes), default=EXIT_OK)
    problems = bundle.violations()
    for p in problems:
        log.error("%s", p)
    if problems:
        code = max(code, EXIT_INVARIANT)
    return code, bundle
