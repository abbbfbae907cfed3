"""Strict experiment configuration: a JSON key-value tree validated field by field.

Matrices are written as ``{"rows": r, "cols": c, "data": [[...], ...]}`` and
vectors as plain lists. Unknown keys, wrong types and dimension mismatches are
all errors; every error carries the dotted path of the offending field and,
when it can be located, the line it sits on.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
import re
from dataclasses import dataclass

import numpy as np

from .engine import InitStrategy, RunConfig
from .qp import SolverSettings
from .system import BoxConstraints, LinearSystem, QuadraticStageCost, TaskSpec

FORMATS = ("csv", "json")


class ConfigError(ValueError):
    """A malformed configuration; ``path`` names the field, ``line`` its location if known."""

    def __init__(self, path: str, message: str, line: int | None = None):
        self.path, self.message, self.line = path, message, line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{path or '<root>'}: {message}")


def _line_of(text: str | None, path: str) -> int | None:
    """Best-effort line number of the field at dotted `path` inside `text`."""
    if not text or not path:
        return None
    pos = 0
    found = None
    for key in path.split("."):
        key = re.sub(r"\[\d+\]$", "", key)
        m = re.compile(r'"%s"\s*:' % re.escape(key)).search(text, pos)
        if m is None:
            break
        pos = found = m.start()
    return None if found is None else text.count("\n", 0, found) + 1


class _Reader:
    def __init__(self, text=None):
        self.text = text

    def fail(self, path, message):
        raise ConfigError(path, message, _line_of(self.text, path))

    def table(self, node, path, allowed, required=()):
        if not isinstance(node, dict):
            self.fail(path, f"expected an object, got {type(node).__name__}")
        unknown = sorted(set(node) - set(allowed))
        if unknown:
            self.fail(path, f"unknown key(s) {unknown}; allowed: {sorted(allowed)}")
        for key in required:
            if key not in node:
                self.fail(path, f"missing required key '{key}'")
        return node

    def number(self, v, path, positive=False):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            self.fail(path, f"expected a finite number, got {v!r}")
        if positive and not v > 0:
            self.fail(path, f"must be positive, got {v!r}")
        return float(v)

    def integer(self, v, path, minimum=None):
        if isinstance(v, bool) or not isinstance(v, int):
            self.fail(path, f"expected an integer, got {v!r}")
        if minimum is not None and v < minimum:
            self.fail(path, f"must be >= {minimum}, got {v}")
        return v

    def boolean(self, v, path):
        if not isinstance(v, bool):
            self.fail(path, f"expected true or false, got {v!r}")
        return v

    def vector(self, v, path, size=None):
        if not isinstance(v, list) or not v:
            self.fail(path, f"expected a non-empty list of numbers, got {v!r}")
        out = [self.number(x, f"{path}[{i}]") for i, x in enumerate(v)]
        if size is not None and len(out) != size:
            self.fail(path, f"expected {size} entries, got {len(out)}")
        return out

    def matrix(self, node, path, rows=None, cols=None):
        self.table(node, path, ("rows", "cols", "data"), ("rows", "cols", "data"))
        r = self.integer(node["rows"], f"{path}.rows", 1)
        c = self.integer(node["cols"], f"{path}.cols", 1)
        if rows is not None and r != rows:
            self.fail(f"{path}.rows", f"expected {rows}, got {r}")
        if cols is not None and c != cols:
            self.fail(f"{path}.cols", f"expected {cols}, got {c}")
        data = node["data"]
        if not isinstance(data, list) or len(data) != r:
            self.fail(f"{path}.data", f"expected {r} rows")
        out = [self.vector(row, f"{path}.data[{i}]", c) for i, row in enumerate(data)]
        return {"rows": r, "cols": c, "data": out}


def _read_task(rd: _Reader, node, path="task"):
    rd.table(node, path, ("system", "constraints", "cost", "x_S", "x_F", "N"),
             ("system", "constraints", "cost", "x_S"))
    sysn = rd.table(node["system"], f"{path}.system", ("A", "B"), ("A", "B"))
    A = rd.matrix(sysn["A"], f"{path}.system.A")
    n = A["rows"]
    if A["cols"] != n:
        rd.fail(f"{path}.system.A", f"must be square, got {n}x{A['cols']}")
    B = rd.matrix(sysn["B"], f"{path}.system.B", n)
    m = B["cols"]
    cn = rd.table(node["constraints"], f"{path}.constraints", ("x_lo", "x_hi", "u_lo", "u_hi"),
                  ("x_lo", "x_hi", "u_lo", "u_hi"))
    cons = {k: rd.vector(cn[k], f"{path}.constraints.{k}", n if k[0] == "x" else m)
            for k in ("x_lo", "x_hi", "u_lo", "u_hi")}
    cost = rd.table(node["cost"], f"{path}.cost", ("Q", "R"), ("Q", "R"))
    out = {
        "system": {"A": A, "B": B},
        "constraints": cons,
        "cost": {"Q": rd.matrix(cost["Q"], f"{path}.cost.Q", n, n),
                 "R": rd.matrix(cost["R"], f"{path}.cost.R", m, m)},
        "x_S": rd.vector(node["x_S"], f"{path}.x_S", n),
        "x_F": rd.vector(node.get("x_F", [0.0] * n), f"{path}.x_F", n),
        "N": rd.integer(node.get("N", 4), f"{path}.N", 2),
    }
    return out


_SOLVER_DEFAULTS = {"eps_primal": 1e-9, "eps_dual": 1e-9, "max_iter": 200, "polish": True,
                    "eps_infeasible": 1e-6}
_RUN_DEFAULTS = {"eps_termination": 1e-8, "gamma_steady": 1e-6, "max_iterations": 100,
                 "max_steps_per_iteration": 500, "init_strategy": "DetunedMPC", "init_params": {},
                 "eps_terminal": 1e-4, "max_safe_set_points": None, "strict": True}


def _read_run(rd: _Reader, node, path="run"):
    rd.table(node, path, tuple(_RUN_DEFAULTS) + ("solver",))
    out = dict(_RUN_DEFAULTS)
    for key in ("eps_termination", "gamma_steady", "eps_terminal"):
        if key in node:
            out[key] = rd.number(node[key], f"{path}.{key}", positive=True)
    for key in ("max_iterations", "max_steps_per_iteration"):
        if key in node:
            out[key] = rd.integer(node[key], f"{path}.{key}", 1)
    if "init_strategy" in node:
        allowed = [s.value for s in InitStrategy]
        if node["init_strategy"] not in allowed:
            rd.fail(f"{path}.init_strategy", f"expected one of {allowed}, got {node['init_strategy']!r}")
        out["init_strategy"] = node["init_strategy"]
    if "init_params" in node:
        ip = rd.table(node["init_params"], f"{path}.init_params", ("r_scale", "horizon"))
        params = {}
        if "r_scale" in ip:
            params["r_scale"] = rd.number(ip["r_scale"], f"{path}.init_params.r_scale", positive=True)
        if "horizon" in ip:
            params["horizon"] = rd.integer(ip["horizon"], f"{path}.init_params.horizon", 1)
        out["init_params"] = params
    if node.get("max_safe_set_points") is not None:
        out["max_safe_set_points"] = rd.integer(node["max_safe_set_points"], f"{path}.max_safe_set_points", 1)
    if "strict" in node:
        out["strict"] = rd.boolean(node["strict"], f"{path}.strict")
    solver = dict(_SOLVER_DEFAULTS)
    if "solver" in node:
        sn = rd.table(node["solver"], f"{path}.solver", tuple(_SOLVER_DEFAULTS))
        for key in ("eps_primal", "eps_dual", "eps_infeasible"):
            if key in sn:
                solver[key] = rd.number(sn[key], f"{path}.solver.{key}", positive=True)
        if "max_iter" in sn:
            solver["max_iter"] = rd.integer(sn["max_iter"], f"{path}.solver.max_iter", 1)
        if "polish" in sn:
            solver["polish"] = rd.boolean(sn["polish"], f"{path}.solver.polish")
    out["solver"] = solver
    return out


def _read_output(rd: _Reader, node, path="output"):
    rd.table(node, path, ("directory", "formats", "checkpoint"))
    out = {"directory": "results", "formats": list(FORMATS), "checkpoint": False}
    if "directory" in node:
        if not isinstance(node["directory"], str) or not node["directory"]:
            rd.fail(f"{path}.directory", "expected a non-empty string")
        out["directory"] = node["directory"]
    if "formats" in node:
        fm = node["formats"]
        if not isinstance(fm, list) or not fm or any(f not in FORMATS for f in fm):
            rd.fail(f"{path}.formats", f"expected a non-empty subset of {list(FORMATS)}, got {fm!r}")
        out["formats"] = [f for f in FORMATS if f in fm]
    if "checkpoint" in node:
        out["checkpoint"] = rd.boolean(node["checkpoint"], f"{path}.checkpoint")
    return out


@dataclass(frozen=True)
class Case:
    """One learning run of the experiment: the base task or a sweep entry."""

    index: int
    task: TaskSpec
    run: RunConfig
    oracle_T: int


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description; ``data`` is the normalized tree with all defaults filled."""

    data: dict

    @property
    def config_hash(self) -> str:
        canon = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    @property
    def output(self) -> dict:
        return self.data["output"]

    def cases(self, checkpoint_dir: str | None = None) -> list[Case]:
        base = self.data["task"]
        entries = [(base["x_S"], base["N"])] + [(e["x_S"], e["N"]) for e in self.data["sweep"]]
        out = []
        for k, (x_S, N) in enumerate(entries):
            task = build_task(dict(base, x_S=x_S, N=N))
            ckpt = None if checkpoint_dir is None else f"{checkpoint_dir}/case{k:02d}"
            out.append(Case(k, task, build_run(self.data["run"], task, ckpt), self.data["oracle"]["T"]))
        return out


def _mat(node):
    return np.array(node["data"], dtype=float).reshape(node["rows"], node["cols"])


def build_task(t: dict) -> TaskSpec:
    return TaskSpec(
        system=LinearSystem(A=_mat(t["system"]["A"]), B=_mat(t["system"]["B"])),
        constraints=BoxConstraints(**{k: np.array(v) for k, v in t["constraints"].items()}),
        cost=QuadraticStageCost(Q=_mat(t["cost"]["Q"]), R=_mat(t["cost"]["R"])),
        x_S=np.array(t["x_S"]), x_F=np.array(t["x_F"]), N=t["N"],
    )


def build_run(r: dict, task: TaskSpec, checkpoint_dir: str | None = None) -> RunConfig:
    fields = {k: v for k, v in r.items() if k != "solver"}
    return RunConfig(spec=task, solver=SolverSettings(**r["solver"]), checkpoint_dir=checkpoint_dir,
                     init_params=dict(fields.pop("init_params")), **fields)


def parse_config(data, text: str | None = None) -> ExperimentConfig:
    """Validate a decoded config tree; `text` (the source) only sharpens diagnostics."""
    rd = _Reader(text)
    rd.table(data, "", ("task", "run", "oracle", "output", "sweep"), ("task",))
    out = {"task": _read_task(rd, data["task"])}
    out["run"] = _read_run(rd, data.get("run", {}))
    on = rd.table(data.get("oracle", {}), "oracle", ("T",))
    out["oracle"] = {"T": rd.integer(on.get("T", 200), "oracle.T", 50)}
    out["output"] = _read_output(rd, data.get("output", {}))
    sweep = data.get("sweep", [])
    if not isinstance(sweep, list):
        rd.fail("sweep", "expected a list of {x_S, N} entries")
    n = len(out["task"]["x_S"])
    out["sweep"] = []
    for i, e in enumerate(sweep):
        p = f"sweep[{i}]"
        rd.table(e, p, ("x_S", "N"), ("x_S", "N"))
        out["sweep"].append({"x_S": rd.vector(e["x_S"], f"{p}.x_S", n),
                             "N": rd.integer(e["N"], f"{p}.N", 2)})
    # domain checks (definiteness, equilibrium, start inside the box)
    try:
        base = build_task(out["task"])
        build_run(out["run"], base)
    except ValueError as exc:
        raise ConfigError("task", str(exc), _line_of(text, "task")) from None
    for i, e in enumerate(out["sweep"]):
        try:
            build_task(dict(out["task"], **e))
        except ValueError as exc:
            raise ConfigError(f"sweep[{i}]", str(exc), _line_of(text, "sweep")) from None
    return ExperimentConfig(out)


def loads(text: str) -> ExperimentConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc.msg} (column {exc.colno})", exc.lineno) from None
    return parse_config(data, text)


def load(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def with_overrides(data: dict, x_S=None, N=None) -> dict:
    """Copy of a raw config tree with the base task's start and horizon replaced."""
    out = copy.deepcopy(data)
    if x_S is not None:
        out["task"]["x_S"] = list(x_S)
    if N is not None:
        out["task"]["N"] = N
    return out
