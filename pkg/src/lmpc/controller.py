"""Finite-horizon learning MPC problem and the receding-horizon control law.

Decision vector layout: ``[u_0 .. u_{N-1} | x_1 .. x_N | lambda_1 .. lambda_S]``.
The terminal state is tied to a convex combination of stored states,
``x_N = D lambda``, whose stored costs ``c' lambda`` form the terminal cost;
the problem therefore stays a single convex QP.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .qp import QPProblem, SolverSettings, Status, solve
from .system import TaskSpec

log = logging.getLogger(__name__)


class EmptySafeSetError(ValueError):
    pass


class ControllerInfeasibleError(RuntimeError):
    """The learning MPC problem was certified infeasible (or could not be solved)."""

    def __init__(self, message, status=None, dump_path=None):
        super().__init__(message)
        self.status = status
        self.dump_path = dump_path


@dataclass(frozen=True)
class ControlStep:
    u_applied: np.ndarray
    predicted_states: np.ndarray  # (N, n): x_{1|t} .. x_{N|t}
    predicted_inputs: np.ndarray  # (N, m)
    lam: np.ndarray
    optimal_cost: float
    solve_time: float
    qp_iterations: int
    qp_dim: int
    status: Status


def layout(spec: TaskSpec, S: int):
    """Slices of the decision vector: ``(u, x, lambda)``."""
    nu = spec.m * spec.N
    nx = spec.n * spec.N
    return slice(0, nu), slice(nu, nu + nx), slice(nu + nx, nu + nx + S)


def build_qp(spec: TaskSpec, snapshot, x_t) -> QPProblem:
    D, c = snapshot
    S = D.shape[1] if D.ndim == 2 else 0
    if S == 0:
        raise EmptySafeSetError("the safe set is empty: seed it with a feasible iteration-0 trajectory first")
    n, m, N = spec.n, spec.m, spec.N
    A, B = spec.system.A, spec.system.B
    Q, R = spec.cost.Q, spec.cost.R
    x_t = np.asarray(x_t, dtype=float).reshape(n)
    su, sx, sl = layout(spec, S)
    d = sl.stop

    # quadratic block covers inputs and x_1..x_{N-1}; x_N and lambda enter linearly
    H = scipy.linalg.block_diag(*([2.0 * R] * N + [2.0 * Q] * (N - 1) + [np.zeros((n, n))]))
    f = np.zeros(d)
    f[sl] = c

    rows = n * N + n + 1
    A_eq = np.zeros((rows, d))
    b_eq = np.zeros(rows)
    for k in range(N):
        r = slice(k * n, (k + 1) * n)
        A_eq[r, sx.start + k * n: sx.start + (k + 1) * n] = np.eye(n)
        A_eq[r, su.start + k * m: su.start + (k + 1) * m] = -B
        if k == 0:
            b_eq[r] = A @ x_t
        else:
            A_eq[r, sx.start + (k - 1) * n: sx.start + k * n] = -A
    r = slice(n * N, n * N + n)
    A_eq[r, sx.start + (N - 1) * n: sx.stop] = np.eye(n)
    A_eq[r, sl] = -D
    A_eq[-1, sl] = 1.0
    b_eq[-1] = 1.0

    box = spec.constraints
    lb = np.concatenate([np.tile(box.u_lo, N), np.tile(box.x_lo, N), np.zeros(S)])
    ub = np.concatenate([np.tile(box.u_hi, N), np.tile(box.x_hi, N), np.full(S, np.inf)])
    return QPProblem(H=H, f=f, A_eq=A_eq, b_eq=b_eq, lb=lb, ub=ub)


class LMPCController:
    """Receding-horizon controller over a fixed safe-set snapshot.

    Each instance keeps the previous solution to warm-start the next one;
    use one instance per closed-loop run.
    """

    def __init__(self, spec: TaskSpec, settings: SolverSettings = SolverSettings(),
                 dump_dir: str | Path | None = None):
        self.spec = spec
        self.settings = settings
        self.dump_dir = Path(dump_dir) if dump_dir is not None else None
        self._warm = None

    def reset(self):
        self._warm = None

    def _warm_start(self, S):
        if self._warm is None:
            return None
        z, prev_S = self._warm
        if prev_S != S:
            return None
        spec = self.spec
        su, sx, sl = layout(spec, S)
        u = z[su].reshape(spec.N, spec.m)
        x = z[sx].reshape(spec.N, spec.n)
        u = np.vstack([u[1:], u[-1:]])
        x = np.vstack([x[1:], x[-1:]])
        return np.concatenate([u.ravel(), x.ravel(), z[sl]])

    def solve_step(self, snapshot, x_t) -> ControlStep:
        spec = self.spec
        t0 = time.perf_counter()
        qp = build_qp(spec, snapshot, x_t)
        S = snapshot[0].shape[1]
        sol = solve(qp, self.settings, z0=self._warm_start(S))
        elapsed = time.perf_counter() - t0
        if sol.status is not Status.OPTIMAL:
            path = self._dump(qp, x_t, snapshot, sol.status)
            self._warm = None
            raise ControllerInfeasibleError(
                f"learning MPC problem returned {sol.status.value} at x_t={np.asarray(x_t).tolist()} "
                f"(S={S}, residuals {sol.primal_residual:.2e}/{sol.dual_residual:.2e})"
                + (f"; problem written to {path}" if path else ""),
                status=sol.status, dump_path=path,
            )
        self._warm = (sol.z, S)
        su, sx, sl = layout(spec, S)
        u = sol.z[su].reshape(spec.N, spec.m)
        x = sol.z[sx].reshape(spec.N, spec.n)
        x_t = np.asarray(x_t, dtype=float)
        cost = sol.objective + float(x_t @ spec.cost.Q @ x_t)
        return ControlStep(
            u_applied=u[0].copy(), predicted_states=x, predicted_inputs=u, lam=sol.z[sl],
            optimal_cost=cost, solve_time=elapsed, qp_iterations=sol.iterations,
            qp_dim=qp.n_var, status=sol.status,
        )

    def _dump(self, qp: QPProblem, x_t, snapshot, status):
        if self.dump_dir is None:
            return None
        self.dump_dir.mkdir(parents=True, exist_ok=True)
        path = self.dump_dir / f"failed_qp_{len(list(self.dump_dir.glob('failed_qp_*.npz'))):04d}.npz"
        np.savez(path, H=qp.H, f=qp.f, A_eq=qp.A_eq, b_eq=qp.b_eq, lb=qp.lb, ub=qp.ub,
                 x_t=np.asarray(x_t), D=snapshot[0], c=snapshot[1], status=str(status.value))
        log.error("wrote failing QP to %s", path)
        return path


def solve_step(spec: TaskSpec, snapshot, x_t, settings: SolverSettings = SolverSettings()) -> ControlStep:
    """One-shot version of :meth:`LMPCController.solve_step` without warm start."""
    return LMPCController(spec, settings).solve_step(snapshot, x_t)
