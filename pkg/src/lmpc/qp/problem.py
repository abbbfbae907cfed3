"""Dense convex QP container and solution record."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITER = "MaxIter"


@dataclass(frozen=True)
class SolverSettings:
    """Tolerances for :func:`lmpc.qp.solve`.

    Attributes
    ----------
    eps_primal, eps_dual : float
        Residual bounds (inf-norm) required for an Optimal status.
    max_iter : int
        Interior-point iteration budget.
    polish : bool
        Refine the interior-point iterate on its identified active set.
    eps_infeasible : float
        Relative constraint violation a phase-one solve must exceed before
        Infeasible is reported.
    """
    eps_primal: float = 1e-9
    eps_dual: float = 1e-9
    max_iter: int = 200
    polish: bool = True
    eps_infeasible: float = 1e-6

    def __post_init__(self):
        for name in ("eps_primal", "eps_dual", "eps_infeasible"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")


def _vec(v, size, name, fill):
    if v is None:
        return np.full(size, fill, dtype=float)
    v = np.array(v, dtype=float).reshape(-1)
    if v.size != size:
        raise ValueError(f"{name} has length {v.size}, expected {size}")
    return v


def _mat(a, cols, name):
    if a is None:
        return np.zeros((0, cols))
    a = np.array(a, dtype=float)
    if a.ndim == 1:
        a = a.reshape(1, -1) if cols > 1 or a.size == 1 else a.reshape(-1, 1)
    if a.ndim != 2 or a.shape[1] != cols:
        raise ValueError(f"{name} must have {cols} columns, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class QPProblem:
    """``min 1/2 z'Hz + f'z  s.t.  A_eq z = b_eq,  lo <= A_in z <= hi,  lb <= z <= ub``.

    `H` may be smaller than the number of variables: a k x k matrix acts on
    the leading k entries of z and the remaining ones enter the cost linearly.
    This keeps problems with thousands of purely linear variables (convex
    combination weights, slacks) from carrying a mostly-zero d x d Hessian.
    Infinite entries in `lo`, `hi`, `lb`, `ub` mean the side is unbounded.
    """

    H: np.ndarray
    f: np.ndarray
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None
    A_in: np.ndarray = None
    lo: np.ndarray = None
    hi: np.ndarray = None
    lb: np.ndarray = None
    ub: np.ndarray = None

    def __post_init__(self):
        f = np.array(self.f, dtype=float).reshape(-1)
        d = f.size
        H = np.array(self.H, dtype=float)
        if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] > d:
            raise ValueError(f"H must be a square k x k matrix with k <= {d}, got {H.shape}")
        if H.size:
            if np.max(np.abs(H - H.T)) > 1e-12 * max(1.0, np.max(np.abs(H))):
                raise ValueError("H must be symmetric")
            scale = np.linalg.norm(H, 2)
            if np.linalg.eigvalsh(H).min() < -1e-9 * max(scale, 1e-300):
                raise ValueError("H must be positive semidefinite")
        A_eq = _mat(self.A_eq, d, "A_eq")
        b_eq = _vec(self.b_eq, A_eq.shape[0], "b_eq", 0.0)
        A_in = _mat(self.A_in, d, "A_in")
        lo = _vec(self.lo, A_in.shape[0], "lo", -np.inf)
        hi = _vec(self.hi, A_in.shape[0], "hi", np.inf)
        lb = _vec(self.lb, d, "lb", -np.inf)
        ub = _vec(self.ub, d, "ub", np.inf)
        if np.any(lo > hi) or np.any(lb > ub):
            raise ValueError("inequality bounds must satisfy lower <= upper")
        for name, v in (("H", H), ("f", f), ("A_eq", A_eq), ("b_eq", b_eq), ("A_in", A_in),
                        ("lo", lo), ("hi", hi), ("lb", lb), ("ub", ub)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @property
    def n_var(self) -> int:
        return self.f.size

    def objective(self, z) -> float:
        k = self.H.shape[0]
        zk = z[:k]
        return float(0.5 * zk @ self.H @ zk + self.f @ z)

    def primal_residual(self, z) -> float:
        """Largest equality or bound violation at `z` (infinity norm)."""
        r = 0.0
        if self.A_eq.shape[0]:
            r = max(r, float(np.max(np.abs(self.A_eq @ z - self.b_eq))))
        if self.A_in.shape[0]:
            a = self.A_in @ z
            r = max(r, float(np.max(np.maximum(self.lo - a, 0.0))),
                    float(np.max(np.maximum(a - self.hi, 0.0))))
        if z.size:
            r = max(r, float(np.max(np.maximum(self.lb - z, 0.0))),
                    float(np.max(np.maximum(z - self.ub, 0.0))))
        return r


@dataclass
class QPSolution:
    z: np.ndarray
    objective: float
    status: Status
    primal_residual: float
    dual_residual: float
    iterations: int
    solve_time: float
    polished: bool = False
    y_eq: np.ndarray = field(default=None, repr=False)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL
