import json
import math
from decimal import Decimal

import pytest

from lmpc import cli, config as cfg, reporting
from lmpc.engine import InvariantViolation
from lmpc.reporting import ReportBundle, fmt_float, report_timing


def preset(name="clqr", **over):
    data = cli.preset_data(name)
    return cfg.with_overrides(data, **over)


def write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data, indent=2))
    return p


def test_fmt_float_is_fixed_width_17_digits():
    assert fmt_float(0.1) == "1.0000000000000001e-01"
    for v in (49.9163600464, 1e-300, -2.5e17, 123456789.0):
        # exact binary value rounded to 17 significant digits
        mant, exp = fmt_float(v).split("e")
        ref_mant, ref_exp = format(Decimal(v), ".16e").split("e")
        assert mant == ref_mant and int(exp) == int(ref_exp) and len(exp) >= 3
    assert fmt_float(float("nan")) == "nan" and fmt_float(-math.inf) == "-inf"
    assert float(fmt_float(1 / 3)) == 1 / 3


def test_presets_parse():
    for name in cli.PRESETS:
        conf = cfg.parse_config(cli.preset_data(name))
        assert conf.data["task"]["N"] in (2, 4)
    t2 = cfg.parse_config(cli.preset_data("table2"))
    cases = t2.cases()
    assert len(cases) == 12
    assert sorted({c.task.N for c in cases}) == [2, 3, 4]


@pytest.mark.parametrize("mutate, path", [
    (lambda d: d["run"].update(bogus=1), "run"),
    (lambda d: d["task"]["cost"]["Q"].update(rows=3), "task.cost.Q.rows"),
    (lambda d: d["task"]["system"]["B"]["data"].append([1.0]), "task.system.B.data"),
    (lambda d: d["task"].update(N=1), "task.N"),
    (lambda d: d["task"].update(x_S=[0.0, "a"]), "task.x_S[1]"),
    (lambda d: d["output"].update(formats=["xml"]), "output.formats"),
    (lambda d: d.update(sweep=[{"x_S": [0.0, 0.0]}]), "sweep[0]"),
    (lambda d: d["run"]["solver"].update(max_iter=0) if "solver" in d["run"] else d["run"].update(
        solver={"max_iter": 0}), "run.solver.max_iter"),
])
def test_strict_parsing_reports_field(mutate, path):
    data = preset()
    mutate(data)
    with pytest.raises(cfg.ConfigError) as exc:
        cfg.parse_config(data)
    assert exc.value.path == path


def test_domain_errors_are_config_errors():
    data = preset()
    data["task"]["cost"]["R"]["data"] = [[-1.0]]
    with pytest.raises(cfg.ConfigError, match="positive definite"):
        cfg.parse_config(data)


def test_json_syntax_error_has_line(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "task": {\n    "N": 4,,\n  }\n}\n')
    assert cli.main(["run", str(p)]) == 1
    assert "line 3" in capsys.readouterr().err


def test_unknown_key_diagnostic_has_line(tmp_path, capsys):
    data = preset()
    data["oracle"]["horizon"] = 100
    p = write(tmp_path, data)
    assert cli.main(["run", str(p), "--output-dir", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err
    assert "oracle" in err and "horizon" in err and "line" in err


def test_trivial_preset_one_iteration(tmp_path, capsys):
    out = tmp_path / "o"
    assert cli.main(["preset", "clqr", "--xs", "0,0", "--output-dir", str(out)]) == 0
    rows = (out / "convergence.csv").read_text().splitlines()
    assert len(rows) == 2
    row = dict(zip(rows[0].split(","), rows[1].split(",")))
    assert row["iterations_to_steady_state"] == "1"
    assert float(row["final_cost"]) == 0.0 and row["status"] == "ok"
    it = (out / "iterations.csv").read_text().splitlines()
    assert it[0] == "case,j,iteration_cost,t_j,max_lyapunov_residual"
    assert len(it) == 3


def test_run_outputs_round_trip_and_compare(tmp_path):
    out = tmp_path / "o"
    p = write(tmp_path, preset(x_S=[-1.0, 0.5]))
    assert cli.main(["run", str(p), "--output-dir", str(out), "--seed", "7"]) == 0
    text = (out / "summary.json").read_text()
    bundle = ReportBundle.loads(text)
    assert bundle.dumps() == text
    assert bundle.metadata["seed"] == 7
    assert bundle.iterations_csv() == (out / "iterations.csv").read_text()
    assert (out / "trajectories" / "case00_j0000.json").exists()
    assert (out / "trajectories" / "case00_oracle.json").exists()
    assert bundle.convergence_table[0]["sigma_bar"] <= 1e-3
    assert cli.main(["compare", str(out), "--oracle"]) == 0
    # tampering is detected
    csv_path = out / "iterations.csv"
    csv_path.write_text(csv_path.read_text().replace("e+0", "e+1", 1))
    assert cli.main(["compare", str(out)]) == 2


def test_deterministic_csv(tmp_path):
    data = preset(x_S=[-1.0, 0.5])
    outs = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        assert cli.main(["run", str(write(tmp_path, data)), "--output-dir", str(out)]) == 0
        outs.append(out)
    for name in ("iterations.csv", "convergence.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_infeasible_task_exit_3(tmp_path):
    # x1 leaves the box one step ahead whatever the input
    data = preset(x_S=[3.9, 1.0])
    code, bundle = reporting.run_experiment(cfg.parse_config(data), out_dir=tmp_path / "o")
    assert code == 3
    assert bundle.convergence_table[0]["status"] == "infeasible"
    assert bundle.timing[0].get("solve_time_ms") is None  # empty timing block


def test_invariant_violation_exit_2(tmp_path, monkeypatch):
    def broken(config):
        raise InvariantViolation("iteration cost increased", None)
    monkeypatch.setattr(reporting, "run_learning", broken)
    code, bundle = reporting.run_experiment(cfg.parse_config(preset(x_S=[-1.0, 0.5])), out_dir=tmp_path / "o")
    assert code == 2
    assert bundle.convergence_table[0]["status"] == "invariant"


def test_bundle_reasserts_monotone_costs():
    b = ReportBundle(iteration_table=[{"case": 0, "j": 0, "iteration_cost": 5.0},
                                      {"case": 0, "j": 1, "iteration_cost": 6.0},
                                      {"case": 1, "j": 0, "iteration_cost": 1.0}])
    assert len(b.violations()) == 1


def test_report_timing_empty():
    assert report_timing(None) == {}


def test_sweep_gives_one_block_per_entry(tmp_path):
    data = preset(x_S=[-1.0, 0.5])
    data["sweep"] = [{"x_S": [0.5, -0.5], "N": 3}, {"x_S": [0.0, 0.0], "N": 2}]
    data["run"]["max_iterations"] = 3
    code, bundle = reporting.run_experiment(cfg.parse_config(data), out_dir=tmp_path / "o", jobs=2)
    assert code == 0
    assert [t["case"] for t in bundle.timing] == [0, 1, 2]
    assert [r["N"] for r in bundle.convergence_table] == [4, 3, 2]
    for t in bundle.timing[:2]:
        assert set(t["solve_time_ms"]) == {"min", "median", "p99", "max"}
        assert t["wall_time_s"] > 0


def test_json_only_output(tmp_path):
    data = preset(x_S=[0.0, 0.0])
    data["output"]["formats"] = ["json"]
    code, _ = reporting.run_experiment(cfg.parse_config(data), out_dir=tmp_path / "o")
    assert code == 0
    assert not (tmp_path / "o" / "iterations.csv").exists()
    assert (tmp_path / "o" / "summary.json").exists()


def test_bad_jobs_flag(capsys):
    assert cli.main(["preset", "clqr", "--jobs", "0"]) == 1
