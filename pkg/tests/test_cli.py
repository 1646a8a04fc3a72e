import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from ensemble_oc.cli import main
from ensemble_oc.config import RunConfig
from ensemble_oc.exceptions import InputError

ROOT = Path(__file__).resolve().parent.parent
CONFIGS = ROOT / "configs"
GOLDEN = Path(__file__).resolve().parent / "golden"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def cfg_path(name):
    return CONFIGS / f"{name}.json"


@pytest.mark.parametrize("name", sorted(p.stem for p in CONFIGS.glob("*.json")))
def test_config_round_trip(name):
    raw = json.loads(cfg_path(name).read_text())
    first = RunConfig.from_dict(raw).to_dict()
    second = RunConfig.from_dict(first).to_dict()
    assert first == second
    assert json.loads(json.dumps(first)) == first


def test_config_errors_are_located(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "system": {"family": "scalar_linear"},\n  "x0": oops\n}\n')
    with pytest.raises(InputError, match=r"bad.json:3:"):
        RunConfig.from_file(bad)


@pytest.mark.parametrize("mutate, match", [
    (lambda c: c.update(schema_version=2), "schema_version"),
    (lambda c: c["system"].update(family="duffing"), "duffing"),
    (lambda c: c["cost"]["ell_u"].update(kind="cubic"), "cubic"),
    (lambda c: c.update(solver={"kind": "nelder_mead", "tolerance": 1}), "tolerance"),
    (lambda c: c.update(measure={"kind": "empirical", "k": 4}) or c.pop("seed"), "seed"),
    (lambda c: c.pop("x0"), "x0"),
])
def test_config_validation(mutate, match):
    raw = json.loads(cfg_path("two_atom_lq").read_text())
    mutate(raw)
    with pytest.raises(InputError, match=match):
        RunConfig.from_dict(raw)


def test_rollout_examples(capsys, tmp_path):
    u = tmp_path / "u.csv"
    u.write_text("0\n0\n")
    code, out, _ = run(capsys, "rollout", "--config", cfg_path("dirac_rollout"), "--theta", "0.5",
                       "--u", u, "--out", tmp_path)
    assert code == 0
    assert json.loads(out) == {"J_N": 1.3125, "J_N0": 1.3125}
    assert (tmp_path / "trajectory.csv").read_text() == "n,x_1\n0,1.0\n1,0.5\n2,0.25\n"
    u.write_text("u_1\n-0.25\n")
    code, out, _ = run(capsys, "rollout", "--config", cfg_path("dirac"), "--u", u, "--out", tmp_path)
    assert code == 0 and json.loads(out)["J_N"] == 0.125


def test_rollout_input_errors(capsys, tmp_path):
    code, _, err = run(capsys, "rollout", "--config", cfg_path("dirac"), "--u", tmp_path / "missing.csv")
    assert code == 2 and "missing.csv" in err
    bad = tmp_path / "bad.csv"
    bad.write_text("0.1\nabc\n")
    code, _, err = run(capsys, "rollout", "--config", cfg_path("dirac"), "--u", bad)
    assert code == 2 and "bad.csv:2" in err
    code, _, _ = run(capsys, "rollout", "--config", cfg_path("two_atom_lq"), "--u", bad)
    assert code == 2
    code, _, _ = run(capsys, "rollout")
    assert code == 2
    code, _, _ = run(capsys, "no-such-command")
    assert code == 2


@pytest.mark.parametrize("name, value", [("two_atom_lq", 0.375), ("dirac", 0.125)])
def test_solve_examples(capsys, tmp_path, name, value):
    code, out, _ = run(capsys, "solve", "--config", cfg_path(name), "--out", tmp_path)
    assert code == 0
    assert (tmp_path / "u_star.csv").read_text() == "-0.25\n"
    report = json.loads((tmp_path / "report.json").read_text())
    assert abs(report["value"] - value) <= 1e-6
    assert json.loads(out)["termination"] == "tolerance-met"


def test_solve_unsupported_solver_exits_2(capsys, tmp_path):
    raw = json.loads(cfg_path("two_atom_lq").read_text())
    raw["cost"]["ell_u"] = {"kind": "threshold", "lambda": 1.0}
    raw["solver"] = {"kind": "fd_gradient"}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(raw))
    code, _, err = run(capsys, "solve", "--config", path, "--out", tmp_path)
    assert code == 2 and "continuous" in err


def test_solve_max_iter_exits_3(capsys, tmp_path):
    raw = json.loads(cfg_path("two_atom_lq").read_text())
    raw["solver"] = {"kind": "fd_gradient", "max_iter": 1, "g_tol": 1e-300}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(raw))
    code, out, _ = run(capsys, "solve", "--config", path, "--out", tmp_path)
    assert code == 3 and json.loads(out)["termination"] == "max-iter"


def test_solve_refused_by_checks_exits_4(capsys, tmp_path):
    code, out, err = run(capsys, "solve", "--config", cfg_path("broken_moduli"), "--out", tmp_path)
    assert code == 4
    reports = json.loads(out)
    assert reports[0]["status"] == "fail" and reports[0]["violations"]
    assert not (tmp_path / "report.json").exists()


def test_check_assumptions_exit_codes(capsys, tmp_path):
    code, out, _ = run(capsys, "check-assumptions", "--config", cfg_path("scalar_lemma3"))
    assert code == 0 and all(r["status"] == "pass" for r in json.loads(out))
    code, out, _ = run(capsys, "check-assumptions", "--config", cfg_path("broken_moduli"), "--out", tmp_path)
    assert code == 1
    failing = [r for r in json.loads(out) if r["status"] == "fail"]
    assert failing and failing[0]["violations"][0]["inputs"]["theta"]
    assert (tmp_path / "checks.json").exists()
    code, _, _ = run(capsys, "check-assumptions", "--config", cfg_path("dirac"))
    assert code == 2


def test_gamma_sweep_single_point_grid(capsys, tmp_path):
    code, out, _ = run(capsys, "gamma-sweep", "--config", cfg_path("scalar_lq_uniform"), "--k-grid", "16",
                       "--out", tmp_path)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert len(summary["median_value_gap"]) == 1
    assert code == 0
    code, _, _ = run(capsys, "gamma-sweep", "--config", cfg_path("scalar_lq_uniform"), "--k-grid", "a,b")
    assert code == 2


def test_seed_override_and_thread_env(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("ENSEMBLE_OC_THREADS", "3")
    a, b = tmp_path / "a", tmp_path / "b"
    run(capsys, "gamma-sweep", "--config", cfg_path("scalar_lq_uniform"), "--k-grid", "16,64", "--out", a)
    run(capsys, "gamma-sweep", "--config", cfg_path("scalar_lq_uniform"), "--k-grid", "16,64", "--out", b,
        "--seed", "7", "--threads", "1")
    assert (a / "values.csv").read_text() != (b / "values.csv").read_text()
    monkeypatch.setenv("ENSEMBLE_OC_THREADS", "many")
    code, _, _ = run(capsys, "gamma-sweep", "--config", cfg_path("scalar_lq_uniform"), "--k-grid", "16")
    assert code == 2


GOLDEN_RUNS = [
    ("two_atom_lq", ["solve"]),
    ("dirac", ["solve"]),
    ("dirac_rollout", ["rollout", "--u", GOLDEN / "u_zero_2.csv"]),
    ("scalar_lq_uniform", ["gamma-sweep"]),
    ("scalar_lemma3", ["check-assumptions"]),
]


@pytest.mark.parametrize("name, argv", GOLDEN_RUNS, ids=[g[0] for g in GOLDEN_RUNS])
def test_golden_artifacts(capsys, tmp_path, name, argv):
    code, out, _ = run(capsys, argv[0], "--config", cfg_path(name), "--out", tmp_path, *argv[1:])
    assert code == 0
    expected_dir = GOLDEN / name
    for expected in sorted(expected_dir.iterdir()):
        got = out if expected.name == "stdout.json" else (tmp_path / expected.name).read_text()
        assert got == expected.read_text(), expected.name


def test_console_script_entry_point(tmp_path):
    exe = shutil.which("ensemble-oc")
    cmd = [exe] if exe else [sys.executable, "-m", "ensemble_oc.cli"]
    proc = subprocess.run(cmd + ["solve", "--config", str(cfg_path("dirac")), "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["value"] == 0.125
