"""Stored closed-loop data: trajectories, the convex safe set and its barycentric terminal cost."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .qp import SolverSettings, Status, solve_lp
from .system import DimensionError, QuadraticStageCost, stage_cost

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
DEFAULT_EPS_TERMINAL = 1e-4
SUFFIX_RTOL = 1e-9
EQUILIBRIUM_ITERATION = -1


class CorruptTrajectoryError(ValueError):
    """Trajectory data is internally inconsistent."""


class SafeSetSolverError(RuntimeError):
    """The terminal-cost LP neither converged nor certified infeasibility."""


@dataclass(frozen=True)
class Trajectory:
    """Realized states/inputs of one iteration with the cost-to-go of every state.

    ``states`` is ``(t_j + 1, n)``, ``inputs`` is ``(t_j, m)`` and
    ``cost_to_go[t]`` is the sum of stage costs from ``t`` to the end plus the
    value assigned to the last stored state (zero for a rollout that ends
    exactly at the target, the controller's optimal value otherwise).
    """

    iteration_index: int
    states: np.ndarray
    inputs: np.ndarray
    cost_to_go: np.ndarray

    def __post_init__(self):
        states = np.array(self.states, dtype=float)
        if states.ndim == 1:
            states = states.reshape(1, -1)
        inputs = np.array(self.inputs, dtype=float)
        if inputs.size == 0:
            inputs = inputs.reshape(0, inputs.shape[1] if inputs.ndim == 2 else 1)
        cost_to_go = np.array(self.cost_to_go, dtype=float).reshape(-1)
        if not (len(states) == len(inputs) + 1 == len(cost_to_go)):
            raise DimensionError(
                f"need len(states) = len(inputs) + 1 = len(cost_to_go), got "
                f"{len(states)}, {len(inputs)}, {len(cost_to_go)}"
            )
        for name, v in (("states", states), ("inputs", inputs), ("cost_to_go", cost_to_go)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @classmethod
    def from_rollout(cls, iteration_index, states, inputs, cost: QuadraticStageCost,
                     tail: float = 0.0) -> "Trajectory":
        """Build the cost-to-go by suffix sums; `tail` is the value assigned to the last state."""
        states = np.asarray(states, dtype=float)
        m = cost.R.shape[0]
        inputs = np.asarray(inputs, dtype=float).reshape(len(states) - 1, m)
        stages = np.array([stage_cost(cost, x, u) for x, u in zip(states[:-1], inputs)])
        ctg = np.zeros(len(states))
        acc = float(tail)
        ctg[-1] = acc
        for t in range(len(stages) - 1, -1, -1):
            acc += stages[t]
            ctg[t] = acc
        return cls(iteration_index, states, inputs, ctg)

    @property
    def duration(self) -> int:
        return len(self.inputs)

    @property
    def iteration_cost(self) -> float:
        return float(self.cost_to_go[0])

    def to_dict(self) -> dict:
        return {
            "iteration": int(self.iteration_index),
            "duration": self.duration,
            "input_dim": int(self.inputs.shape[1]),
            "states": self.states.tolist(),
            "inputs": self.inputs.tolist(),
            "cost_to_go": self.cost_to_go.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Trajectory":
        inputs = np.asarray(data["inputs"], dtype=float).reshape(-1, int(data["input_dim"]))
        return cls(int(data["iteration"]), data["states"], inputs, data["cost_to_go"])


@dataclass(frozen=True)
class SafeSetPoint:
    state: np.ndarray
    cost_to_go: float
    iteration: int
    time: int


class SafeSetStore:
    """Pool of (state, cost-to-go) records from successful iterations.

    The equilibrium record ``(x_F, 0)`` is always present so the convex hull
    contains the target exactly, independently of where stored trajectories
    were truncated.
    """

    def __init__(self, cost: QuadraticStageCost, x_F=None, max_points: int | None = None,
                 settings: SolverSettings = SolverSettings()):
        self.cost = cost
        n = cost.Q.shape[0]
        self.x_F = np.zeros(n) if x_F is None else np.asarray(x_F, dtype=float).reshape(n)
        self.n = n
        self.max_points = max_points
        self.settings = settings
        self.points: list[SafeSetPoint] = [SafeSetPoint(self.x_F.copy(), 0.0, EQUILIBRIUM_ITERATION, 0)]
        self.successful_iterations: list[int] = []
        self.rejections: list[tuple[int, str]] = []
        self._snapshot = None

    @classmethod
    def for_task(cls, spec, **kwargs) -> "SafeSetStore":
        return cls(spec.cost, spec.x_F, **kwargs)

    def __len__(self):
        return len(self.points)

    def add_trajectory(self, traj: Trajectory, eps_terminal: float = DEFAULT_EPS_TERMINAL) -> bool:
        """Append `traj` if it ends within `eps_terminal` of ``x_F``; return whether it was accepted."""
        if traj.states.shape[1] != self.n:
            raise DimensionError(f"trajectory states have dimension {traj.states.shape[1]}, expected {self.n}")
        self._check_suffix(traj)
        residual = float(np.linalg.norm(traj.states[-1] - self.x_F))
        if not residual <= eps_terminal:
            reason = f"terminal residual {residual:.3e} exceeds {eps_terminal:.1e}"
            log.warning("iteration %d rejected from the safe set: %s", traj.iteration_index, reason)
            self.rejections.append((traj.iteration_index, reason))
            return False
        for t, (x, c) in enumerate(zip(traj.states, traj.cost_to_go)):
            self.points.append(SafeSetPoint(np.array(x), float(c), traj.iteration_index, t))
        self.successful_iterations.append(traj.iteration_index)
        self._enforce_cap()
        self._snapshot = None
        return True

    def _check_suffix(self, traj: Trajectory):
        ctg = traj.cost_to_go
        if not ctg[-1] >= 0.0:
            raise CorruptTrajectoryError(f"terminal cost-to-go is {ctg[-1]!r}, expected a value >= 0")
        for t in range(traj.duration):
            h = stage_cost(self.cost, traj.states[t], traj.inputs[t])
            expected = h + ctg[t + 1]
            if abs(ctg[t] - expected) > SUFFIX_RTOL * max(1.0, abs(expected)):
                raise CorruptTrajectoryError(
                    f"cost-to-go suffix identity violated at t={t}: {ctg[t]!r} != {expected!r}"
                )

    def _enforce_cap(self):
        if self.max_points is None or len(self.points) <= self.max_points:
            return
        excess = len(self.points) - self.max_points
        log.warning("safe set capped at %d points: dropping %d oldest records; "
                    "feasibility and cost-improvement guarantees no longer hold", self.max_points, excess)
        kept = [self.points[0]] + self.points[1 + excess:]
        self.points = kept

    def snapshot(self) -> tuple[np.ndarray, np.ndarray]:
        """Column matrix of stored states (``n x S``) and the aligned cost vector."""
        if self._snapshot is None:
            D = np.array([p.state for p in self.points]).T.copy()
            c = np.array([p.cost_to_go for p in self.points])
            D.setflags(write=False)
            c.setflags(write=False)
            self._snapshot = (D, c)
        return self._snapshot

    def _lp(self, x):
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.n:
            raise DimensionError(f"query state has length {x.size}, expected {self.n}")
        D, c = self.snapshot()
        S = D.shape[1]
        A_eq = np.vstack([D, np.ones((1, S))])
        b_eq = np.concatenate([x, [1.0]])
        sol = solve_lp(c, A_eq=A_eq, b_eq=b_eq, lb=np.zeros(S), settings=self.settings)
        if sol.status is Status.MAX_ITER:
            raise SafeSetSolverError(
                f"terminal-cost LP hit the iteration limit ({sol.iterations}); "
                f"residuals {sol.primal_residual:.2e}/{sol.dual_residual:.2e}"
            )
        return sol

    def terminal_cost(self, x) -> float:
        """Barycentric cost of `x`: cheapest convex combination of stored costs; ``inf`` outside the hull."""
        sol = self._lp(x)
        if sol.status is Status.INFEASIBLE:
            return math.inf
        return max(float(sol.objective), 0.0)

    def terminal_weights(self, x):
        """Optimal convex-combination weights for `x`, or ``None`` outside the hull."""
        sol = self._lp(x)
        return None if sol.status is Status.INFEASIBLE else sol.z

    def contains(self, x) -> bool:
        return self._lp(x).status is Status.OPTIMAL

    # serialization

    def to_dict(self) -> dict:
        return {
            "format": "lmpc-safe-set",
            "version": FORMAT_VERSION,
            "n": self.n,
            "x_F": self.x_F.tolist(),
            "Q": self.cost.Q.tolist(),
            "R": self.cost.R.tolist(),
            "max_points": self.max_points,
            "successful_iterations": list(self.successful_iterations),
            "points": [
                {"state": p.state.tolist(), "cost_to_go": p.cost_to_go, "iteration": p.iteration, "time": p.time}
                for p in self.points
            ],
        }

    @classmethod
    def from_dict(cls, data: dict, settings: SolverSettings = SolverSettings()) -> "SafeSetStore":
        if data.get("format") != "lmpc-safe-set" or data.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported safe-set document (format={data.get('format')!r}, "
                             f"version={data.get('version')!r})")
        store = cls(QuadraticStageCost(data["Q"], data["R"]), data["x_F"], data["max_points"], settings)
        store.points = [
            SafeSetPoint(np.array(p["state"], dtype=float), float(p["cost_to_go"]), int(p["iteration"]), int(p["time"]))
            for p in data["points"]
        ]
        store.successful_iterations = [int(j) for j in data["successful_iterations"]]
        return store

    def dumps(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def loads(cls, text: str, settings: SolverSettings = SolverSettings()) -> "SafeSetStore":
        return cls.from_dict(json.loads(text), settings)
