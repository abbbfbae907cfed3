"""Reference solution of the infinite-horizon constrained LQR and error metrics.

The reference is one long-horizon QP closed by the unconstrained LQR
cost-to-go ``x'Px``. It is exact once the LQR law, started from the final
state, provably stays inside the constraints (checked by rollout).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .qp import QPProblem, SolverSettings, Status, solve
from .system import TaskSpec, in_constraints

TAIL_CHECK_STEPS = 50
MAX_DOUBLINGS = 3


class RiccatiDivergenceError(RuntimeError):
    pass


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True)
class RiccatiSolution:
    P: np.ndarray
    K: np.ndarray
    residual: float
    iterations: int


def dare_residual(A, B, Q, R, P) -> float:
    BtP = B.T @ P
    rhs = Q + A.T @ P @ A - A.T @ P @ B @ np.linalg.solve(R + BtP @ B, BtP @ A)
    return float(np.linalg.norm(P - rhs, "fro"))


def solve_riccati(A, B, Q, R, tol: float = 1e-12, max_iter: int = 10_000) -> RiccatiSolution:
    """Discrete algebraic Riccati equation by value iteration from ``P = Q``."""
    A, B, Q, R = (np.atleast_2d(np.asarray(M, dtype=float)) for M in (A, B, Q, R))
    P = Q.copy()
    for it in range(1, max_iter + 1):
        BtP = B.T @ P
        P_next = Q + A.T @ P @ A - A.T @ P @ B @ np.linalg.solve(R + BtP @ B, BtP @ A)
        P_next = 0.5 * (P_next + P_next.T)
        if not np.all(np.isfinite(P_next)) or np.max(np.abs(P_next)) > 1e15:
            raise RiccatiDivergenceError(
                "Riccati iteration diverged; (A, B) is probably not stabilizable"
            )
        delta = float(np.linalg.norm(P_next - P, "fro"))
        P = P_next
        if delta <= tol * max(1.0, float(np.linalg.norm(P, "fro"))):
            break
    else:
        raise RiccatiDivergenceError(
            f"Riccati iteration did not converge in {max_iter} iterations; "
            "check that (A, B) is stabilizable"
        )
    K = np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
    return RiccatiSolution(P=P, K=K, residual=dare_residual(A, B, Q, R, P), iterations=it)


@dataclass(frozen=True)
class OracleSolution:
    states: np.ndarray  # (T + 1, n)
    inputs: np.ndarray  # (T, m)
    cost: float
    horizon: int
    tail_certified: bool

    def to_dict(self) -> dict:
        return {
            "iteration": "oracle",
            "duration": len(self.inputs),
            "input_dim": int(self.inputs.shape[1]),
            "states": self.states.tolist(),
            "inputs": self.inputs.tolist(),
            "cost": self.cost,
            "horizon": self.horizon,
            "tail_certified": self.tail_certified,
        }


def _tail_certified(spec: TaskSpec, K, x_T, steps=TAIL_CHECK_STEPS, tol=1e-9) -> bool:
    A, B = spec.system.A, spec.system.B
    x = np.asarray(x_T, dtype=float)
    for _ in range(steps):
        u = -K @ x
        if not in_constraints(spec.constraints, x, u, tol):
            return False
        x = A @ x + B @ u
    return True


def _horizon_qp(spec: TaskSpec, T: int, P_terminal, R_scale: float = 1.0,
                terminal_equality: bool = False) -> QPProblem:
    """Horizon-T regulation QP from ``x_S`` over ``[u_0..u_{T-1} | x_1..x_T]``."""
    n, m = spec.n, spec.m
    A, B = spec.system.A, spec.system.B
    Q, R = spec.cost.Q, R_scale * spec.cost.R
    nu, nx = m * T, n * T
    d = nu + nx
    blocks = [2.0 * R] * T + [2.0 * Q] * (T - 1) + [2.0 * P_terminal]
    H = scipy.linalg.block_diag(*blocks)
    f = np.zeros(d)
    rows = n * T + (n if terminal_equality else 0)
    A_eq = np.zeros((rows, d))
    b_eq = np.zeros(rows)
    for k in range(T):
        r = slice(k * n, (k + 1) * n)
        A_eq[r, nu + k * n: nu + (k + 1) * n] = np.eye(n)
        A_eq[r, k * m: (k + 1) * m] = -B
        if k == 0:
            b_eq[r] = A @ spec.x_S
        else:
            A_eq[r, nu + (k - 1) * n: nu + k * n] = -A
    if terminal_equality:
        A_eq[n * T:, nu + (T - 1) * n:] = np.eye(n)
        b_eq[n * T:] = spec.x_F
    box = spec.constraints
    lb = np.concatenate([np.tile(box.u_lo, T), np.tile(box.x_lo, T)])
    ub = np.concatenate([np.tile(box.u_hi, T), np.tile(box.x_hi, T)])
    return QPProblem(H=H, f=f, A_eq=A_eq, b_eq=b_eq, lb=lb, ub=ub)


def _unpack(spec: TaskSpec, T: int, z):
    nu = spec.m * T
    inputs = z[:nu].reshape(T, spec.m)
    states = np.vstack([spec.x_S, z[nu:].reshape(T, spec.n)])
    return states, inputs


def solve_clqr(spec: TaskSpec, T: int = 200, settings: SolverSettings = SolverSettings(),
               riccati: RiccatiSolution | None = None) -> OracleSolution:
    """Constrained infinite-horizon LQR from ``spec.x_S`` (long horizon plus certified LQR tail)."""
    if T < 50:
        raise ValueError(f"oracle horizon must be at least 50, got {T}")
    sysm, cost = spec.system, spec.cost
    ric = riccati or solve_riccati(sysm.A, sysm.B, cost.Q, cost.R)
    horizon = T
    for _ in range(MAX_DOUBLINGS + 1):
        qp = _horizon_qp(spec, horizon, ric.P)
        sol = solve(qp, settings)
        if sol.status is not Status.OPTIMAL:
            raise OracleError(f"oracle QP returned {sol.status.value} for horizon {horizon}")
        states, inputs = _unpack(spec, horizon, sol.z)
        if _tail_certified(spec, ric.K, states[-1]):
            total = sol.objective + float(spec.x_S @ cost.Q @ spec.x_S)
            return OracleSolution(states=states, inputs=inputs, cost=total, horizon=horizon, tail_certified=True)
        horizon *= 2
    raise OracleError(f"LQR tail certificate failed up to horizon {horizon // 2}")


def lqr_rollout(spec: TaskSpec, K, steps: int) -> np.ndarray:
    A, B = spec.system.A, spec.system.B
    x = spec.x_S.copy()
    out = [x]
    for _ in range(steps):
        x = (A - B @ K) @ x
        out.append(x)
    return np.array(out)


def _pad(states, length, x_F):
    if len(states) >= length:
        return states[:length]
    pad = np.tile(x_F, (length - len(states), 1))
    return np.vstack([states, pad])


def trajectory_deviation(a, b, x_F) -> float:
    """Max over t of ``||a_t - b_t||_2``, the shorter sequence padded with ``x_F``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    length = max(len(a), len(b))
    diff = _pad(a, length, x_F) - _pad(b, length, x_F)
    return float(np.max(np.linalg.norm(diff, axis=1))) if length else 0.0


def error_metrics(oracle: OracleSolution, learned, x_F=None) -> tuple[float, float]:
    """``(sigma_bar, delta_j)``: max state deviation and percent cost gap of `learned` against `oracle`."""
    states = learned.states
    x_F = np.zeros(states.shape[1]) if x_F is None else np.asarray(x_F, dtype=float)
    if not np.allclose(states[0], oracle.states[0], rtol=0.0, atol=1e-12):
        raise ValueError("learned and oracle trajectories start from different states")
    sigma_bar = trajectory_deviation(oracle.states, states, x_F)
    j_star = oracle.cost
    j_learned = learned.iteration_cost
    if j_star == 0.0:
        delta = 0.0 if j_learned == 0.0 else math.inf
    else:
        delta = abs(j_star - j_learned) / j_star * 100.0
    return sigma_bar, delta
