import csv
import json
import subprocess
import sys

import pytest

from torus_ci import cli


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_dry_run_prints_config(capsys):
    code, out, _ = run(["exponents", "--dry-run", "--set", "p=1/2"], capsys)
    assert code == 0
    d = json.loads(out)
    assert d["report_version"] == 1
    assert d["config"]["command"] == "exponents" and d["config"]["params"] == {"p": "1/2"}
    code2, out2, _ = run(["--dry-run", "exponents", "--set", "p=1/2"], capsys)
    assert (code2, out2) == (code, out)


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "verify-blocks", "grid": 128, "params": {"mu2": 8}}))
    code, out, _ = run(["--config", str(cfg), "--dry-run", "verify-blocks", "--n", "256"], capsys)
    d = json.loads(out)["config"]
    assert code == 0 and d["grid"] == 256 and d["params"] == {"mu2": 8}


@pytest.mark.parametrize(
    "argv",
    [
        ["exponents", "--set", "zeta=1"],
        ["verify-blocks", "--set", "mu1=8", "--set", "mu2=4"],
        ["verify-blocks", "--sweep", "omega=1,2"],
        ["hardy", "--set", "p=0.55"],
        ["step", "--set", "lam=6"],
        ["bogus"],
        [],
    ],
)
def test_config_errors_exit_3(argv, capsys):
    code, _, err = run(argv, capsys)
    assert code == 3
    assert "config error" in err


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "exponents", "colour": "red"}))
    code, _, err = run(["--config", str(cfg)], capsys)
    assert code == 3 and "colour" in err


def test_exponents_byte_identical(tmp_path, capsys):
    a = tmp_path / "a.json"
    argv = ["exponents", "--set", "p=1/2", "--set", "sigma=1/2", "--out", str(a)]
    assert run(argv, capsys)[0] == 0
    first = a.read_bytes()
    assert run(argv, capsys)[0] == 0
    assert a.read_bytes() == first
    d = json.loads(a.read_text())
    assert d["all_negative"] and d["offenders"] == []
    assert all(d["closed_form_agrees"].values())
    assert d["ledger"]["terms"]["R_lin1"][0]["exponent"] == "-9"


def test_exponents_reports_violation(capsys):
    code, out, _ = run(["exponents", "--set", "p=1/2", "--set", "sigma=1/2", "--set", "alpha=5", "--set", "s=101/100"], capsys)
    assert code == 2
    assert "grad(u1-u0) in H^p summand 1" in json.loads(out)["offenders"]


def test_verify_blocks_default(capsys):
    code, out, _ = run(["verify-blocks"], capsys)
    assert code == 0
    checks = json.loads(out)["suite"]["checks"]
    assert len(checks) == 5
    assert checks["support_disjoint"]["asserted"] is False


def test_verify_blocks_underresolved(capsys):
    code, _, err = run(["verify-blocks", "--n", "64"], capsys)
    assert code == 2 and "UnderResolved" in err


def test_verify_blocks_sweep_csv(tmp_path, capsys):
    path = tmp_path / "s.csv"
    code, _, _ = run(["verify-blocks", "--n", "512", "--sweep", "mu2=4,8,16", "--csv", str(path)], capsys)
    assert code == 0
    rows = list(csv.reader(path.open()))
    assert rows[0][:2] == ["parameter", "value"]
    assert len(rows) == 4 and all(r[0] == "mu2" for r in rows[1:])


def test_hardy_small_grid(capsys):
    code, out, _ = run(["hardy", "--n", "128"], capsys)
    d = json.loads(out)
    assert code == 0 and d["suite"]["passed"]


def test_step_report_schema(tmp_path, capsys):
    out = tmp_path / "r.json"
    stem = tmp_path / "w"
    code, _, _ = run(["step", "--n", "128", "--out", str(out), "--fields", str(stem)], capsys)
    d = json.loads(out.read_text())
    rep = d["report"]
    assert rep["report_version"] == 1
    assert set(rep["terms_l1"]) == {"R_lin1", "R_lin2", "R_lin3", "R_delta", "R_Y", "R_Q", "R_cross", "R_g", "R_time"}
    assert code == (0 if all(rep["checks"].values()) else 2)
    assert rep["checks"]["frozen_window"]
    assert (tmp_path / "w.bin").exists() and (tmp_path / "w.json").exists()


def test_iterate_resolution_exhausted(capsys):
    code, _, err = run(["iterate", "--set", "n0=256", "--set", "n_max=128"], capsys)
    assert code == 4 and "ResolutionExhausted" in err


def test_console_script_help():
    r = subprocess.run([sys.executable, "-m", "torus_ci.cli", "--help"], capture_output=True, text=True)
    assert r.returncode == 0
    for name in cli.COMMANDS:
        assert name in r.stdout
