"""Plant, constraint and stage-cost data for a constrained linear regulation task."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_CONSTRAINT_TOL = 1e-7


class DimensionError(ValueError):
    """Array shapes do not agree with the system dimensions."""


class EquilibriumError(ValueError):
    """The target state is not an admissible equilibrium."""


def _as_matrix(a, name):
    a = np.array(a, dtype=float)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if a.ndim != 2:
        raise DimensionError(f"{name} must be a matrix, got ndim={a.ndim}")
    a.setflags(write=False)
    return a


def _as_vector(v, size, name):
    v = np.array(v, dtype=float).reshape(-1)
    if v.shape[0] != size:
        raise DimensionError(f"{name} has length {v.shape[0]}, expected {size}")
    v.setflags(write=False)
    return v


@dataclass(frozen=True)
class LinearSystem:
    """Discrete-time linear dynamics ``x+ = A x + B u``."""

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = _as_matrix(self.A, "A")
        B = _as_matrix(self.B, "B")
        if A.shape[0] != A.shape[1] or A.shape[0] < 1:
            raise DimensionError(f"A must be square and nonempty, got {A.shape}")
        if B.shape[0] != A.shape[0] or B.shape[1] < 1:
            raise DimensionError(f"B must be {A.shape[0]}xm with m >= 1, got {B.shape}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class BoxConstraints:
    """Axis-aligned bounds on states and inputs (closed boxes)."""

    x_lo: np.ndarray
    x_hi: np.ndarray
    u_lo: np.ndarray
    u_hi: np.ndarray

    def __post_init__(self):
        x_lo = np.array(self.x_lo, dtype=float).reshape(-1)
        u_lo = np.array(self.u_lo, dtype=float).reshape(-1)
        x_lo = _as_vector(x_lo, x_lo.size, "x_lo")
        x_hi = _as_vector(self.x_hi, x_lo.size, "x_hi")
        u_lo = _as_vector(u_lo, u_lo.size, "u_lo")
        u_hi = _as_vector(self.u_hi, u_lo.size, "u_hi")
        if np.any(x_lo > x_hi) or np.any(u_lo > u_hi):
            raise ValueError("box bounds must satisfy lo <= hi componentwise")
        for name, v in (("x_lo", x_lo), ("x_hi", x_hi), ("u_lo", u_lo), ("u_hi", u_hi)):
            object.__setattr__(self, name, v)

    @property
    def n(self) -> int:
        return self.x_lo.size

    @property
    def m(self) -> int:
        return self.u_lo.size


@dataclass(frozen=True)
class QuadraticStageCost:
    """Stage cost ``h(x, u) = x'Qx + u'Ru`` with Q, R positive definite."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self):
        Q = _as_matrix(self.Q, "Q")
        R = _as_matrix(self.R, "R")
        for name, M in (("Q", Q), ("R", R)):
            if M.shape[0] != M.shape[1]:
                raise DimensionError(f"{name} must be square, got {M.shape}")
            if not np.allclose(M, M.T, rtol=0.0, atol=1e-12):
                raise ValueError(f"{name} must be symmetric")
            if np.linalg.eigvalsh(M).min() <= 0.0:
                raise ValueError(f"{name} must be positive definite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)


@dataclass(frozen=True)
class TaskSpec:
    """A repetitive regulation task: plant, constraints, cost, start, target and horizon."""

    system: LinearSystem
    constraints: BoxConstraints
    cost: QuadraticStageCost
    x_S: np.ndarray
    x_F: np.ndarray = field(default=None)
    N: int = 4

    def __post_init__(self):
        n, m = self.system.n, self.system.m
        if self.constraints.n != n or self.constraints.m != m:
            raise DimensionError("constraint dimensions do not match the system")
        if self.cost.Q.shape != (n, n) or self.cost.R.shape != (m, m):
            raise DimensionError("cost dimensions do not match the system")
        x_S = _as_vector(self.x_S, n, "x_S")
        x_F = _as_vector(np.zeros(n) if self.x_F is None else self.x_F, n, "x_F")
        object.__setattr__(self, "x_S", x_S)
        object.__setattr__(self, "x_F", x_F)
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"horizon N must be an integer >= 2, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        if not _in_box(self.constraints.x_lo, self.constraints.x_hi, x_S, 0.0):
            raise ValueError(f"x_S={x_S.tolist()} lies outside the state constraints")
        validate_equilibrium(self)
        if np.any(x_F != 0.0):
            raise EquilibriumError(
                "only the origin is supported as target equilibrium; "
                "shift coordinates so that x_F = 0"
            )

    @property
    def n(self) -> int:
        return self.system.n

    @property
    def m(self) -> int:
        return self.system.m


def _in_box(lo, hi, v, tol):
    return bool(np.all(v >= lo - tol) and np.all(v <= hi + tol))


def _check_dims(sys, x, u):
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if x.size != sys.n:
        raise DimensionError(f"state has length {x.size}, expected {sys.n}")
    if u.size != sys.m:
        raise DimensionError(f"input has length {u.size}, expected {sys.m}")
    return x, u


def step(sys: LinearSystem, x, u) -> np.ndarray:
    """Advance the plant one step: ``A x + B u``."""
    x, u = _check_dims(sys, x, u)
    return sys.A @ x + sys.B @ u


def stage_cost(cost: QuadraticStageCost, x, u) -> float:
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if x.size != cost.Q.shape[0] or u.size != cost.R.shape[0]:
        raise DimensionError("state/input length does not match the cost matrices")
    return float(x @ cost.Q @ x + u @ cost.R @ u)


def validate_equilibrium(spec: TaskSpec, tol: float = 1e-12) -> None:
    """Raise :class:`EquilibriumError` unless ``x_F`` is an unforced fixed point inside the state box.

    Only the ``system``, ``constraints`` and ``x_F`` attributes of `spec` are read,
    so any object carrying them can be checked, including candidate targets
    that :class:`TaskSpec` itself would refuse.
    """
    x_F = spec.x_F
    residual = float(np.max(np.abs(spec.system.A @ x_F - x_F)))
    if residual > tol:
        raise EquilibriumError(f"x_F is not a fixed point of A: ||A x_F - x_F||_inf = {residual:.3e}")
    c = spec.constraints
    if not _in_box(c.x_lo, c.x_hi, x_F, 0.0):
        raise EquilibriumError(f"x_F={x_F.tolist()} lies outside the state constraints")


def in_constraints(c: BoxConstraints, x, u, tol: float = DEFAULT_CONSTRAINT_TOL) -> bool:
    x = np.asarray(x, dtype=float).reshape(-1)
    u = np.asarray(u, dtype=float).reshape(-1)
    if x.size != c.n or u.size != c.m:
        raise DimensionError("state/input length does not match the constraint box")
    return _in_box(c.x_lo, c.x_hi, x, tol) and _in_box(c.u_lo, c.u_hi, u, tol)


def clqr_task(x_S=(-3.95, -0.05), N: int = 4) -> TaskSpec:
    """Double integrator with unit quadratic cost and boxes |x_i| <= 4, |u| <= 1."""
    return TaskSpec(
        system=LinearSystem(A=[[1.0, 1.0], [0.0, 1.0]], B=[[0.0], [1.0]]),
        constraints=BoxConstraints(x_lo=[-4.0, -4.0], x_hi=[4.0, 4.0], u_lo=[-1.0], u_hi=[1.0]),
        cost=QuadraticStageCost(Q=np.eye(2), R=np.eye(1)),
        x_S=np.asarray(x_S, dtype=float),
        x_F=np.zeros(2),
        N=N,
    )
