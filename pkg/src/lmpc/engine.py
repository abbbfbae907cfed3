"""Iteration loop: seed trajectory, closed-loop LMPC iterations, safe-set updates, steady state."""
from __future__ import annotations

import enum
import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .controller import ControllerInfeasibleError, LMPCController
from .oracle import _horizon_qp, _unpack, solve_riccati, trajectory_deviation
from .qp import SolverSettings, Status, solve
from .safe_set import DEFAULT_EPS_TERMINAL, SafeSetStore, Trajectory
from .system import TaskSpec, in_constraints, stage_cost, step

log = logging.getLogger(__name__)

COST_MONOTONE_TOL = 1e-6
LYAPUNOV_TOL = 1e-6


class InitStrategy(str, enum.Enum):
    DETUNED_MPC = "DetunedMPC"
    LONG_HORIZON_QP = "LongHorizonQP"


class InitialTrajectoryError(RuntimeError):
    """No feasible, convergent iteration-0 trajectory could be produced."""


class InvariantViolation(AssertionError):
    """A guarantee of the learning controller failed numerically."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class IterationInfeasible(RuntimeError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class RunConfig:
    spec: TaskSpec
    eps_termination: float = 1e-8
    gamma_steady: float = 1e-6
    max_iterations: int = 100
    max_steps_per_iteration: int = 500
    init_strategy: InitStrategy = InitStrategy.DETUNED_MPC
    init_params: dict = field(default_factory=dict)
    eps_terminal: float = DEFAULT_EPS_TERMINAL
    solver: SolverSettings = SolverSettings()
    max_safe_set_points: int | None = None
    strict: bool = True
    checkpoint_dir: str | None = None

    def __post_init__(self):
        for name in ("eps_termination", "gamma_steady", "eps_terminal"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be positive")
        if self.max_iterations < 1 or self.max_steps_per_iteration < 1:
            raise ValueError("max_iterations and max_steps_per_iteration must be >= 1")
        object.__setattr__(self, "init_strategy", InitStrategy(self.init_strategy))


@dataclass(frozen=True)
class StepRecord:
    t: int
    x: np.ndarray
    u: np.ndarray | None
    cost: float  # optimal value of the controller problem at x_t (nan for iteration 0)
    lyapunov_residual: float  # J(x_{t+1}) - J(x_t) + h(x_t, u_t); nan where undefined
    solve_time: float
    qp_dim: int
    qp_iterations: int


@dataclass
class IterationReport:
    j: int
    iteration_cost: float
    duration: int
    steps: list[StepRecord]
    feasible: bool
    accepted: bool = False
    wall_time: float = 0.0
    safe_set_size: int = 0
    infeasible_steps: int = 0

    @property
    def max_lyapunov_residual(self) -> float:
        vals = [s.lyapunov_residual for s in self.steps if not math.isnan(s.lyapunov_residual)]
        return max(vals) if vals else math.nan

    @property
    def solve_times(self) -> list[float]:
        return [s.solve_time for s in self.steps if not math.isnan(s.solve_time)]

    def to_dict(self) -> dict:
        return {
            "j": self.j,
            "iteration_cost": self.iteration_cost,
            "duration": self.duration,
            "feasible": self.feasible,
            "accepted": self.accepted,
            "wall_time": self.wall_time,
            "safe_set_size": self.safe_set_size,
            "infeasible_steps": self.infeasible_steps,
            "steps": [
                {
                    "t": s.t,
                    "x": s.x.tolist(),
                    "u": None if s.u is None else s.u.tolist(),
                    "cost": s.cost,
                    "lyapunov_residual": s.lyapunov_residual,
                    "solve_time": s.solve_time,
                    "qp_dim": s.qp_dim,
                    "qp_iterations": s.qp_iterations,
                }
                for s in self.steps
            ],
        }


@dataclass
class RunResult:
    reports: list[IterationReport]
    steady_state_iteration: int | None
    final_trajectory: Trajectory
    safe_set: SafeSetStore
    trajectories: list[Trajectory]
    wall_time: float = 0.0

    @property
    def iteration_costs(self) -> list[float]:
        return [r.iteration_cost for r in self.reports]


def _tail_value(P, x) -> float:
    return float(x @ P @ x)


def _detuned_mpc(spec: TaskSpec, config: RunConfig, r_scale: float) -> Trajectory:
    """Closed loop of a plain MPC with inflated input weight and Riccati terminal cost."""
    ric = solve_riccati(spec.system.A, spec.system.B, spec.cost.Q, r_scale * spec.cost.R)
    horizon = int(config.init_params.get("horizon", spec.N))
    states = [spec.x_S.copy()]
    inputs = []
    x = spec.x_S.copy()
    warm = None
    for _ in range(config.max_steps_per_iteration):
        if _tail_value(ric.P, x) <= config.eps_termination:
            break
        sub = TaskSpec(spec.system, spec.constraints, spec.cost, x, spec.x_F, spec.N)
        qp = _horizon_qp(sub, horizon, ric.P, R_scale=r_scale)
        sol = solve(qp, config.solver, z0=warm)
        if sol.status is not Status.OPTIMAL:
            raise InitialTrajectoryError(f"detuned MPC problem returned {sol.status.value} at x={x.tolist()}")
        _, u_plan = _unpack(sub, horizon, sol.z)
        u = np.clip(u_plan[0], spec.constraints.u_lo, spec.constraints.u_hi)
        x_next = step(spec.system, x, u)
        if not in_constraints(spec.constraints, x_next, u):
            raise InitialTrajectoryError(f"detuned MPC violated the constraints at x={x_next.tolist()}")
        nu = spec.m * horizon
        warm = np.concatenate([sol.z[spec.m:nu], sol.z[nu - spec.m:nu], sol.z[nu + spec.n:], sol.z[-spec.n:]])
        inputs.append(u)
        states.append(x_next)
        x = x_next
    else:
        raise InitialTrajectoryError(
            f"detuned MPC did not reach the target within {config.max_steps_per_iteration} steps"
        )
    return Trajectory.from_rollout(0, np.array(states), np.array(inputs).reshape(-1, spec.m), spec.cost)


def _long_horizon_qp(spec: TaskSpec, config: RunConfig, r_scale: float) -> Trajectory:
    """Open-loop plan with terminal equality ``x_T = x_F`` rolled out on the plant."""
    T = int(config.init_params.get("horizon", config.max_steps_per_iteration))
    ric = solve_riccati(spec.system.A, spec.system.B, spec.cost.Q, spec.cost.R)
    qp = _horizon_qp(spec, T, np.zeros((spec.n, spec.n)), R_scale=r_scale, terminal_equality=True)
    sol = solve(qp, config.solver)
    if sol.status is not Status.OPTIMAL:
        raise InitialTrajectoryError(
            f"no input sequence reaches x_F from x_S within {T} steps under the constraints "
            f"(QP status {sol.status.value})"
        )
    _, u_plan = _unpack(spec, T, sol.z)
    states = [spec.x_S.copy()]
    inputs = []
    x = spec.x_S.copy()
    for t in range(T):
        if _tail_value(ric.P, x) <= config.eps_termination:
            break
        u = np.clip(u_plan[t], spec.constraints.u_lo, spec.constraints.u_hi)
        x = step(spec.system, x, u)
        if not in_constraints(spec.constraints, x, u):
            raise InitialTrajectoryError(f"open-loop rollout violated the state constraints at t={t + 1}")
        inputs.append(u)
        states.append(x)
    return Trajectory.from_rollout(0, np.array(states), np.array(inputs).reshape(-1, spec.m), spec.cost)


def generate_initial_trajectory(spec: TaskSpec, config: RunConfig) -> Trajectory:
    """A feasible, deliberately suboptimal trajectory from ``x_S`` to ``x_F``."""
    r_scale = float(config.init_params.get("r_scale", 10.0))
    if np.array_equal(spec.x_S, spec.x_F):
        return Trajectory(0, spec.x_S.reshape(1, -1), np.zeros((0, spec.m)), [0.0])
    if config.init_strategy is InitStrategy.DETUNED_MPC:
        try:
            traj = _detuned_mpc(spec, config, r_scale)
        except InitialTrajectoryError as exc:
            log.warning("detuned MPC failed (%s); falling back to the long-horizon plan", exc)
            traj = _long_horizon_qp(spec, config, r_scale)
    else:
        traj = _long_horizon_qp(spec, config, r_scale)
    residual = float(np.linalg.norm(traj.states[-1] - spec.x_F))
    if residual > config.eps_terminal:
        raise InitialTrajectoryError(f"initial trajectory ends {residual:.2e} away from x_F")
    return traj


def _report_from_trajectory(traj: Trajectory, spec: TaskSpec) -> IterationReport:
    steps = [
        StepRecord(t, traj.states[t], traj.inputs[t] if t < traj.duration else None,
                   math.nan, math.nan, math.nan, 0, 0)
        for t in range(traj.duration + 1)
    ]
    return IterationReport(j=traj.iteration_index, iteration_cost=traj.iteration_cost,
                           duration=traj.duration, steps=steps, feasible=True)


def run_iteration(spec: TaskSpec, store: SafeSetStore, config: RunConfig, j: int,
                  controller: LMPCController | None = None) -> tuple[Trajectory, IterationReport]:
    """One closed-loop execution of the task from ``x_S`` under the learning MPC."""
    t_start = time.perf_counter()
    controller = controller or LMPCController(spec, config.solver)
    controller.reset()
    snapshot = store.snapshot()
    x = spec.x_S.copy()
    states, inputs, costs, times, dims, iters = [x], [], [], [], [], []
    feasible = False
    infeasible_steps = 0
    for t in range(config.max_steps_per_iteration + 1):
        try:
            cs = controller.solve_step(snapshot, x)
        except ControllerInfeasibleError as exc:
            log.error("iteration %d aborted at t=%d: %s", j, t, exc)
            infeasible_steps += 1
            break
        costs.append(cs.optimal_cost)
        times.append(cs.solve_time)
        dims.append(cs.qp_dim)
        iters.append(cs.qp_iterations)
        if cs.optimal_cost <= config.eps_termination:
            feasible = True
            break
        if t == config.max_steps_per_iteration:
            break
        u = cs.u_applied
        x = step(spec.system, x, u)
        inputs.append(u)
        states.append(x)

    states = np.array(states)
    inputs = np.array(inputs).reshape(-1, spec.m)
    if len(costs) < len(states):
        # aborted after applying an input: the last state has no controller value
        costs.append(math.nan)
        times.append(math.nan)
        dims.append(0)
        iters.append(0)
    # a completed iteration keeps the controller's value at its last state as the tail cost
    tail = costs[len(states) - 1] if feasible else 0.0
    traj = Trajectory.from_rollout(j, states, inputs, spec.cost, tail=tail)
    steps = []
    for t in range(len(states)):
        u = inputs[t] if t < len(inputs) else None
        if u is not None and not math.isnan(costs[t + 1]):
            res = costs[t + 1] - costs[t] + stage_cost(spec.cost, states[t], u)
        else:
            res = math.nan
        steps.append(StepRecord(t, states[t], u, costs[t], res, times[t], dims[t], iters[t]))
    report = IterationReport(j=j, iteration_cost=traj.iteration_cost, duration=traj.duration, steps=steps,
                             feasible=feasible, wall_time=time.perf_counter() - t_start,
                             safe_set_size=snapshot[0].shape[1], infeasible_steps=infeasible_steps)
    return traj, report


def run_learning(config: RunConfig) -> RunResult:
    """Iterate the task until the closed-loop trajectory stops changing."""
    t_start = time.perf_counter()
    spec = config.spec
    store = SafeSetStore.for_task(spec, max_points=config.max_safe_set_points, settings=config.solver)
    traj0 = generate_initial_trajectory(spec, config)
    report0 = _report_from_trajectory(traj0, spec)
    report0.safe_set_size = len(store)
    if not store.add_trajectory(traj0, config.eps_terminal):
        raise InitialTrajectoryError("initial trajectory was rejected by the safe set")
    report0.accepted = True
    reports = [report0]
    trajectories = [traj0]
    result = RunResult(reports, None, traj0, store, trajectories)
    _checkpoint(config, result)

    controller = LMPCController(spec, config.solver,
                                dump_dir=Path(config.checkpoint_dir) / "failed" if config.checkpoint_dir else None)
    prev = traj0
    for j in range(1, config.max_iterations + 1):
        traj, report = run_iteration(spec, store, config, j, controller)
        reports.append(report)
        trajectories.append(traj)
        result.final_trajectory = traj
        if not report.feasible:
            result.wall_time = time.perf_counter() - t_start
            _checkpoint(config, result)
            raise IterationInfeasible(
                f"iteration {j} did not complete (infeasible steps: {report.infeasible_steps}, "
                f"duration {report.duration})", result)
        report.accepted = store.add_trajectory(traj, config.eps_terminal)
        if config.strict:
            _check_invariants(reports, result)
        _checkpoint(config, result)
        deviation = trajectory_deviation(traj.states, prev.states, spec.x_F)
        prev = traj
        if deviation < config.gamma_steady:
            result.steady_state_iteration = j
            break
    result.wall_time = time.perf_counter() - t_start
    return result


def _check_invariants(reports, result):
    cur, before = reports[-1], reports[-2]
    if cur.iteration_cost > before.iteration_cost + COST_MONOTONE_TOL:
        raise InvariantViolation(
            f"iteration cost increased from {before.iteration_cost!r} to {cur.iteration_cost!r} at j={cur.j}",
            result)
    worst = cur.max_lyapunov_residual
    if worst > LYAPUNOV_TOL:
        raise InvariantViolation(f"Lyapunov decrease violated by {worst:.3e} at j={cur.j}", result)


def _checkpoint(config: RunConfig, result: RunResult):
    if not config.checkpoint_dir:
        return
    root = Path(config.checkpoint_dir)
    root.mkdir(parents=True, exist_ok=True)
    j = result.reports[-1].j
    (root / f"safe_set_{j:04d}.json").write_text(result.safe_set.dumps())
    (root / f"report_{j:04d}.json").write_text(json.dumps(result.reports[-1].to_dict()))
