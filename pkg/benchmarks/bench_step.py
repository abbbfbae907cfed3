#!/usr/bin/env python3
"""Per-step controller QP solve time against safe-set size.

Runs one learning experiment, then re-solves the controller problem at x_S
with the safe set as it stood before each iteration and prints a CSV of
(iteration, safe-set points, QP variables, median ms, min ms).
"""
import argparse
import time

import numpy as np

from lmpc.controller import LMPCController
from lmpc.engine import RunConfig, run_learning
from lmpc.safe_set import SafeSetStore
from lmpc.system import clqr_task


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=4, help="controller horizon")
    p.add_argument("--xs", default="-3.95,-0.05")
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()

    spec = clqr_task(tuple(float(v) for v in args.xs.split(",")), args.n)
    t0 = time.perf_counter()
    res = run_learning(RunConfig(spec=spec))
    print(f"# learning run: {len(res.reports) - 1} iterations, {time.perf_counter() - t0:.2f} s")
    print("iteration,points,qp_vars,median_ms,min_ms")
    store = SafeSetStore.for_task(spec)
    for traj in res.trajectories:
        store.add_trajectory(traj)
        snap = store.snapshot()
        ctl = LMPCController(spec)
        times = []
        for _ in range(args.repeat):
            ctl.reset()
            times.append(ctl.solve_step(snap, spec.x_S).solve_time)
        S = snap[0].shape[1]
        d = spec.N * (spec.n + spec.m) + S
        print(f"{traj.iteration_index},{S},{d},{1e3 * np.median(times):.3f},{1e3 * min(times):.3f}")


if __name__ == "__main__":
    main()
