"""Command-line entry point: ``lmpc run``, ``lmpc preset`` and ``lmpc compare``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from importlib import resources
from pathlib import Path

from . import config as cfg
from .oracle import OracleError, error_metrics, solve_clqr
from .reporting import EXIT_CONFIG, EXIT_INVARIANT, EXIT_OK, ReportBundle, run_experiment
from .safe_set import Trajectory

PRESETS = ("clqr", "table2")
COMPARE_TOL = 1e-9


def preset_data(name: str) -> dict:
    text = resources.files("lmpc").joinpath("presets", f"{name}.json").read_text(encoding="utf-8")
    return json.loads(text)


def _parse_xs(text):
    try:
        vals = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not all(math.isfinite(v) for v in vals):
        raise argparse.ArgumentTypeError("x_S entries must be finite")
    return vals


def _print_bundle(bundle: ReportBundle, out):
    print(f"{'case':>4} {'x_S':>22} {'N':>3} {'iters':>6} {'final cost':>20} {'sigma_bar':>10} "
          f"{'dJ %':>10} {'time s':>8}  status", file=out)
    for row, tb in zip(bundle.convergence_table, bundle.timing):
        xs = "[" + ", ".join(f"{v:g}" for v in row["x_S"]) + "]"
        it = row["iterations_to_steady_state"]
        print(f"{row['case']:>4} {xs:>22} {row['N']:>3} {('-' if it is None else it):>6} "
              f"{row['final_cost']:>20.12f} {row['sigma_bar']:>10.2e} {row['delta_j_percent']:>10.2e} "
              f"{tb.get('wall_time_s', math.nan):>8.2f}  {row['status']}", file=out)
    for tb in bundle.timing:
        st = tb.get("solve_time_ms") or {}
        if st:
            print(f"case {tb['case']}: {tb['qp_solves']} QP solves, median {st['median']:.2f} ms, "
                  f"p99 {st['p99']:.2f} ms, final-iteration median {tb['final_iteration_median_ms']:.2f} ms, "
                  f"safe set {tb['safe_set_size'][-1]} points", file=out)


def _execute(data: dict, text: str | None, args) -> int:
    try:
        conf = cfg.parse_config(data, text)
    except cfg.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code, bundle = run_experiment(conf, out_dir=args.output_dir, checkpoint_dir=args.checkpoint_dir,
                                  jobs=args.jobs, seed=args.seed)
    _print_bundle(bundle, sys.stdout)
    return code


def cmd_run(args) -> int:
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        print(f"config error: {args.config}: line {exc.lineno}: invalid JSON: {exc.msg}", file=sys.stderr)
        return EXIT_CONFIG
    return _execute(data, text, args)


def cmd_preset(args) -> int:
    data = preset_data(args.name)
    data = cfg.with_overrides(data, x_S=args.xs, N=args.n)
    return _execute(data, None, args)


def cmd_compare(args) -> int:
    """Re-ingest a run directory; optionally re-derive oracle metrics from the stored trajectories."""
    root = Path(args.run_dir)
    try:
        text = (root / "summary.json").read_text(encoding="utf-8")
        bundle = ReportBundle.loads(text)
    except (OSError, ValueError, KeyError) as exc:
        print(f"cannot read {root / 'summary.json'}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    code = EXIT_OK
    if bundle.dumps() != text:
        print("summary.json does not round-trip", file=sys.stderr)
        code = EXIT_INVARIANT
    for name, emitted in (("iterations.csv", bundle.iterations_csv()), ("convergence.csv", bundle.convergence_csv())):
        path = root / name
        if path.exists() and path.read_text(encoding="utf-8") != emitted:
            print(f"{name} differs from the tables in summary.json", file=sys.stderr)
            code = EXIT_INVARIANT
    if args.oracle:
        conf = cfg.parse_config(bundle.config)
        for case, row in zip(conf.cases(), bundle.convergence_table):
            finals = sorted((root / "trajectories").glob(f"case{case.index:02d}_j*.json"))
            if not finals:
                print(f"case {case.index}: no stored trajectory")
                continue
            traj = Trajectory.from_dict(json.loads(finals[-1].read_text(encoding="utf-8")))
            try:
                orc = solve_clqr(case.task, case.oracle_T, case.run.solver)
            except OracleError as exc:
                print(f"case {case.index}: oracle failed: {exc}")
                code = EXIT_INVARIANT
                continue
            sb, dj = error_metrics(orc, traj, case.task.x_F)
            agree = all(abs(a - b) <= COMPARE_TOL * max(1.0, abs(b)) or (math.isnan(a) and math.isnan(b))
                        for a, b in ((sb, row["sigma_bar"]), (dj, row["delta_j_percent"]),
                                     (orc.cost, row["oracle_cost"])))
            print(f"case {case.index}: oracle cost {orc.cost:.12f}  learned {traj.iteration_cost:.12f}  "
                  f"sigma_bar {sb:.3e}  dJ {dj:.3e} %  {'matches' if agree else 'DIFFERS from'} summary")
            if not agree:
                code = EXIT_INVARIANT
    if code == EXIT_OK:
        print(f"{root}: reports consistent")
    return code


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output-dir", default=None, help="directory for reports (overrides output.directory)")
    common.add_argument("--checkpoint-dir", default=None, help="write per-iteration safe-set checkpoints here")
    common.add_argument("--jobs", type=int, default=1, help="sweep entries run in parallel")
    common.add_argument("--seed", type=int, default=0, help="recorded in the metadata; the runs are deterministic")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="lmpc", description="Learning MPC experiments on constrained linear systems.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", parents=[common], help="run an experiment described by a JSON config")
    r.add_argument("config")
    r.set_defaults(func=cmd_run)
    pr = sub.add_parser("preset", parents=[common], help="run a builtin experiment")
    pr.add_argument("name", choices=PRESETS)
    pr.add_argument("--n", type=int, default=None, help="controller horizon N")
    pr.add_argument("--xs", type=_parse_xs, default=None, help="start state, e.g. -3.95,-0.05")
    pr.set_defaults(func=cmd_preset)
    c = sub.add_parser("compare", help="check a run directory and optionally re-derive oracle metrics")
    c.add_argument("run_dir")
    c.add_argument("--oracle", action="store_true", help="recompute the CLQR oracle and compare")
    c.add_argument("-v", "--verbose", action="store_true")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("--jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
