"""End-to-end command line behavior: outputs, determinism, exit codes."""

import csv
import json
import math
import shutil
import subprocess

import pytest

from couplemax import cli


def run_cli(*argv):
    return cli.main(list(argv))


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def _read_summary(path):
    return json.loads(path.read_text())


# ------------------------------------------------------------------ run: ok

def test_power_schedule_preset_trace(tmp_path):
    out = tmp_path / "fig1"
    assert run_cli("run", "--preset", "bilinear_fig1", "--out-dir", str(out)) == 0
    rows = _read_csv(out / "trace.csv")
    assert rows[0] == ["iter", "x_norm", "y_norm", "lambda_norm", "gradG_norm",
                       "max_violation", "potential", "potential_trusted",
                       "alpha_k", "gamma_k", "p_k", "q_k"]
    assert len(rows) == 4
    assert [r[4] for r in rows[1:]] == [repr(math.sqrt(2.0)), repr(1.0), repr(0.0)]
    summary = _read_summary(out / "summary.json")
    assert summary["converged"] is True
    assert summary["first_hit"] == 3
    assert summary["iterations_used"] == 2
    assert summary["solver"] == "pdpg_l"
    assert summary["final_grad_norm"] == 0.0
    # the trajectory file ends at the exact stationary triple
    traj = _read_csv(out / "trajectory.csv")
    assert traj[0] == ["iter", "x_0", "y_0", "lambda_0"]
    assert traj[-1] == ["3", repr(0.0), repr(0.0), repr(0.0)]


def test_rerun_outputs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert run_cli("run", "--experiment", "random_ncsc", "--seed", "3",
                       "--max-iter", "80", "--eps", "inf",
                       "--out-dir", str(out)) == 0
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()
    assert (a / "trajectory.csv").read_bytes() == (b / "trajectory.csv").read_bytes()
    sa, sb = _read_summary(a / "summary.json"), _read_summary(b / "summary.json")
    sa.pop("wall_time_s"), sb.pop("wall_time_s")
    assert sa == sb


def test_auto_solver_resolution(tmp_path):
    out = tmp_path / "auto"
    assert run_cli("run", "--experiment", "ncsc_quad", "--max-iter", "40",
                   "--eps", "inf", "--out-dir", str(out)) == 0
    assert _read_summary(out / "summary.json")["solver"] == "pdapg_ncsc"
    out2 = tmp_path / "auto2"
    assert run_cli("run", "--experiment", "bilinear", "--max-iter", "20",
                   "--eps", "inf", "--out-dir", str(out2)) == 0
    assert _read_summary(out2 / "summary.json")["solver"] == "pdpg_l"


def test_infinite_eps_runs_out_the_budget(tmp_path):
    out = tmp_path / "gda"
    assert run_cli("run", "--preset", "bilinear_fig1_gda",
                   "--out-dir", str(out)) == 0
    summary = _read_summary(out / "summary.json")
    assert summary["converged"] is False
    assert summary["iterations_used"] == 200
    assert summary["eps"] == "inf"
    assert summary["solver"] == "baseline_gda"
    rows = _read_csv(out / "trace.csv")
    assert len(rows) == 201
    assert rows[0][-1] == "stepsize"


def test_vanishing_damping_solver_runs(tmp_path):
    out = tmp_path / "ncc"
    assert run_cli("run", "--experiment", "bilinear", "--solver", "pdapg_ncc",
                   "--max-iter", "30", "--eps", "inf",
                   "--out-dir", str(out)) == 0
    rows = _read_csv(out / "trace.csv")
    header = rows[0]
    assert "rho_k" in header and "aug_norm" in header
    summary = _read_summary(out / "summary.json")
    assert summary["solver"] == "pdapg_ncc"
    assert summary["iterations_used"] == 30


def test_descent_check_passes_on_theory_run(tmp_path):
    out = tmp_path / "descent"
    assert run_cli("run", "--preset", "ncsc_descent", "--max-iter", "300",
                   "--out-dir", str(out)) == 0
    summary = _read_summary(out / "summary.json")
    assert summary["check"] == "descent"
    assert summary["check_passed"] is True
    assert "merit decreased" in summary["check_message"]
    # potentials were recorded and marked trusted
    rows = _read_csv(out / "trace.csv")
    pot_col = rows[0].index("potential")
    tr_col = rows[0].index("potential_trusted")
    assert all(r[pot_col] != "" and r[tr_col] == "true" for r in rows[1:])


def test_certificate_check_passes_everywhere(tmp_path):
    for extra in (["--experiment", "bilinear", "--solver", "pdpg_l"],
                  ["--experiment", "ncsc_quad", "--solver", "pdapg_ncsc"],
                  ["--experiment", "bilinear", "--solver", "baseline_gda"]):
        out = tmp_path / extra[1] / extra[-1]
        code = run_cli("run", *extra, "--max-iter", "60", "--eps", "inf",
                       "--check", "certificate", "--out-dir", str(out))
        assert code == 0
        assert _read_summary(out / "summary.json")["check_passed"] is True


def test_vdescent_check_on_default_schedule(tmp_path):
    out = tmp_path / "vd"
    assert run_cli("run", "--experiment", "bilinear", "--solver", "pdpg_l",
                   "--max-iter", "120", "--eps", "inf", "--check", "vdescent",
                   "--out-dir", str(out)) == 0
    summary = _read_summary(out / "summary.json")
    assert summary["check_passed"] is True


# ------------------------------------------------------------- run: studies

_STUDY_CONFIG = {
    "experiment": "attack_study",
    "study": {
        "n_nodes": 6,
        "budgets": [0.0, 0.5],
        "seeds": [0, 1],
        "max_iter": 40,
    },
}


def _write_config(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


def test_attack_study_outputs(tmp_path):
    cfgp = _write_config(tmp_path, _STUDY_CONFIG)
    a, b = tmp_path / "s1", tmp_path / "s2"
    for out in (a, b):
        assert run_cli("run", "--config", str(cfgp), "--out-dir", str(out)) == 0
    rows = _read_csv(a / "study.csv")
    assert rows[0] == ["budget", "seed", "q_cl", "q_att", "rho", "iters",
                       "final_eps", "failed"]
    assert len(rows) == 5  # 2 budgets x 2 seeds
    assert rows[1][0] == repr(0.0) and rows[1][5] == "0"
    assert (a / "study.csv").read_bytes() == (b / "study.csv").read_bytes()
    summary = _read_summary(a / "study_summary.json")
    assert summary["n_rows"] == 4
    assert [e["budget"] for e in summary["per_budget"]] == [0.0, 0.5]
    assert summary["per_budget"][0]["mean_rho"] == 0.0


def test_attack_study_job_count_does_not_change_rows(tmp_path):
    cfgp = _write_config(tmp_path, _STUDY_CONFIG)
    a, b = tmp_path / "j1", tmp_path / "j2"
    assert run_cli("run", "--config", str(cfgp), "--out-dir", str(a)) == 0
    assert run_cli("run", "--config", str(cfgp), "--jobs", "2",
                   "--out-dir", str(b)) == 0
    assert (a / "study.csv").read_bytes() == (b / "study.csv").read_bytes()


# ----------------------------------------------------------------- describe

def test_describe_bilinear(capsys):
    assert run_cli("describe", "--experiment", "bilinear", "--seed", "2") == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["experiment"] == "bilinear"
    assert payload["solver"] == "pdpg_l"
    assert (payload["n"], payload["m"], payload["p"]) == (1, 1, 1)
    assert payload["lipschitz_L"] == 1.0
    assert payload["lipschitz_L_sampled"] <= 1.0 + 1e-9
    assert payload["linear_in_y"] is True
    assert payload["weight_checks"]["linear_in_y"] is True
    assert set(payload["schedule_preview"]) == {"1", "10", "100"}
    assert payload["schedule_preview"]["1"]["q_k"] == 0.5


def test_describe_reports_weight_floors(capsys):
    assert run_cli("describe", "--experiment", "ncsc_quad",
                   "--solver", "pdapg_ncsc") == 0
    payload = json.loads(capsys.readouterr().out)
    checks = payload["weight_checks"]
    assert checks["mu_positive"] is True
    assert checks["beta_floor"] == pytest.approx(2.5 * payload["lipschitz_L"])
    assert checks["beta"] == pytest.approx(3.0 * payload["lipschitz_L"])
    assert checks["beta_admissible"] is True
    assert checks["weights_admissible"] is True
    assert checks["alpha_floor"] > 0
    assert payload["schedule_preview"]["1"]["alpha_k"] > checks["alpha_floor"]


def test_describe_flow_instance(capsys):
    assert run_cli("describe", "--instance",
                   "flow_attack:n_nodes=6,budget=0.5") == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["network"]["n_nodes"] == 6
    assert payload["network"]["budget"] == 0.5
    assert payload["n"] == payload["network"]["n_edges"]
    assert payload["senses"]["LE"] == payload["p"]


def test_describe_attack_study(capsys):
    assert run_cli("describe", "--experiment", "attack_study") == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["experiment"] == "attack_study"
    assert payload["study"]["n_nodes"] == 15
    assert payload["study"]["budgets"] == [0.0, 0.5, 1.0, 1.5, 2.0]


# --------------------------------------------------------------- exit codes

def test_unknown_preset_exits_one(tmp_path, capsys):
    out = tmp_path / "nope"
    assert run_cli("run", "--preset", "bogus", "--out-dir", str(out)) == 1
    assert "unknown preset" in capsys.readouterr().err
    assert not out.exists()


def test_unknown_config_key_exits_one(tmp_path, capsys):
    cfgp = _write_config(tmp_path, {"experiment": "bilinear", "stepsize": 0.3})
    out = tmp_path / "o"
    assert run_cli("run", "--config", str(cfgp), "--out-dir", str(out)) == 1
    assert "unknown config key 'stepsize'" in capsys.readouterr().err
    assert not out.exists()


def test_nested_unknown_key_exits_one(tmp_path, capsys):
    cfgp = _write_config(tmp_path, {"flow": {"n_node": 6}})
    out = tmp_path / "o"
    assert run_cli("run", "--config", str(cfgp), "--out-dir", str(out)) == 1
    assert "flow.n_node" in capsys.readouterr().err
    assert not out.exists()


def test_malformed_json_exits_one(tmp_path, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    out = tmp_path / "o"
    assert run_cli("run", "--config", str(path), "--out-dir", str(out)) == 1
    assert "not valid JSON" in capsys.readouterr().err
    assert not out.exists()


def test_missing_config_file_exits_one(tmp_path, capsys):
    out = tmp_path / "o"
    assert run_cli("run", "--config", str(tmp_path / "absent.json"),
                   "--out-dir", str(out)) == 1
    assert "not found" in capsys.readouterr().err


def test_bad_eps_exits_one(tmp_path, capsys):
    out = tmp_path / "o"
    assert run_cli("run", "--experiment", "bilinear", "--eps", "-1",
                   "--out-dir", str(out)) == 1
    assert "eps must be positive" in capsys.readouterr().err
    assert not out.exists()


def test_bad_instance_option_exits_one(capsys):
    assert run_cli("describe", "--instance", "flow_attack:bogus=1") == 1
    assert "flow.bogus" in capsys.readouterr().err
    assert run_cli("describe", "--instance", "bilinear:seed=1") == 1
    assert "takes no options" in capsys.readouterr().err


def test_wrong_solver_for_instance_exits_two(tmp_path, capsys):
    out = tmp_path / "mismatch"
    code = run_cli("run", "--instance", "flow_attack:n_nodes=6",
                   "--solver", "pdpg_l", "--max-iter", "20", "--eps", "inf",
                   "--out-dir", str(out))
    assert code == 2
    assert "solver error" in capsys.readouterr().err
    assert not (out / "summary.json").exists()


def test_failing_check_exits_three(tmp_path, capsys):
    # a run that converges on the first measured iterate leaves a one-row
    # trace, too short to audit the per-step decrease
    out = tmp_path / "short"
    code = run_cli("run", "--preset", "ncsc_descent", "--eps", "1000000",
                   "--out-dir", str(out))
    assert code == 3
    assert "FAIL" in capsys.readouterr().out
    summary = _read_summary(out / "summary.json")
    assert summary["check_passed"] is False


def test_check_solver_pairing_is_validated(tmp_path, capsys):
    out = tmp_path / "pair"
    code = run_cli("run", "--experiment", "ncsc_quad", "--solver", "pdapg_ncsc",
                   "--max-iter", "20", "--eps", "inf", "--check", "vdescent",
                   "--out-dir", str(out))
    assert code == 1
    assert "needs solver pdpg_l" in capsys.readouterr().err


def test_console_script_is_installed(tmp_path):
    exe = shutil.which("couplemax")
    assert exe, "couplemax entry point not on PATH"
    out = tmp_path / "script"
    proc = subprocess.run(
        [exe, "run", "--preset", "bilinear_fig1", "--out-dir", str(out)],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert (out / "summary.json").exists()
    assert "converged=True" in proc.stdout
