import json
import math
import subprocess
import sys

import pytest

from lqglab.cli import main


def run_cli(args):
    return subprocess.run(
        [sys.executable, "-m", "lqglab.cli", *args],
        capture_output=True, text=True,
    )


def test_exact_radius_moment_trivial(capsys):
    rc = main(["exact", "--formula", "radius-moment", "--kappa", "2",
               "--rho-minus", "0", "--rho-plus", "0", "--rho1", "0", "--alpha", "0"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "value=1.0" in out


def test_exact_alpha0(capsys):
    rc = main(["exact", "--formula", "alpha0", "--kappa", "2", "--rho-plus", "0",
               "--rho1", "1"])
    assert rc == 0
    assert "value=4.0" in capsys.readouterr().out


def test_exact_seiberg_violation_exit_code():
    rc = main(["exact", "--formula", "h-bar", "--gamma", "1",
               "--beta1", "0.2", "--beta2", "0.2", "--beta3", "0.3"])
    assert rc == 2


def test_exact_unknown_formula():
    assert main(["exact", "--formula", "nope", "--gamma", "1"]) == 2


def test_exact_missing_params():
    assert main(["exact", "--formula", "r-bar", "--beta", "1.2"]) == 2  # no gamma


def test_identities_fast(tmp_path):
    out = tmp_path / "rep.json"
    csvf = tmp_path / "resid.csv"
    rc = main(["verify-identities", "--grid-size", "4", "--out", str(out),
               "--csv", str(csvf)])
    assert rc == 0
    report = json.loads(out.read_text())
    assert report["command"] == "verify-identities"
    assert report["wall_seconds"] is None
    assert all(g["pass"] for g in report["gates"])
    header = csvf.read_text().splitlines()[0]
    assert header == "identity_name,grid_point,residual,tol"


def test_identities_perturbation_detected():
    rc = main(["verify-identities", "--grid-size", "4", "--perturb", "1e-3"])
    assert rc == 1


def test_config_file_with_flag_override(tmp_path):
    cfgfile = tmp_path / "cfg.json"
    cfgfile.write_text(json.dumps({"formula": "alpha0", "kappa": 2.0,
                                   "rho_plus": 0.0, "rho1": 0.5}))
    out = tmp_path / "rep.json"
    rc = main(["exact", "--formula", "alpha0", "--rho1", "1.0",
               "--config", str(cfgfile), "--out", str(out)])
    assert rc == 0
    rep = json.loads(out.read_text())
    # flag overrides the file value
    assert rep["config"]["rho1"] == 1.0
    assert rep["results"][0]["value"] == 4.0


@pytest.mark.slow
def test_radius_report_deterministic_across_workers(tmp_path):
    base = ["verify-radius", "--kappa", "2", "--rho-minus", "0", "--rho-plus", "0",
            "--rho1", "0", "--alpha", "-1.0", "--n-samples", "400", "--T", "64",
            "--dt", str(2.0**-8), "--seed", "7", "--conv-tol", "0.05",
            "--skip-dt-gate"]
    r1 = tmp_path / "w1.json"
    r2 = tmp_path / "w2.json"
    rc1 = main(base + ["--workers", "1", "--out", str(r1)])
    rc2 = main(base + ["--workers", "2", "--out", str(r2)])
    b1, b2 = r1.read_bytes(), r2.read_bytes()
    assert b1 == b2
    assert rc1 == rc2


@pytest.mark.slow
def test_gmc_report_deterministic_across_workers(tmp_path):
    base = ["verify-gmc", "--gamma", "1", "--beta1", "0.5", "--beta2", "0.5",
            "--beta3", "2.0", "--n-samples", "1500", "--log2n", "10", "--seed", "5",
            "--skip-grid-gate"]
    r1 = tmp_path / "w1.json"
    r2 = tmp_path / "w2.json"
    main(base + ["--workers", "1", "--out", str(r1)])
    main(base + ["--workers", "2", "--out", str(r2)])
    assert r1.read_bytes() == r2.read_bytes()


@pytest.mark.slow
def test_expect_override_fails_gate(tmp_path):
    rc = main(["verify-gmc", "--gamma", "1", "--beta1", "0.5", "--beta2", "0.5",
               "--beta3", "2.0", "--n-samples", "1500", "--log2n", "10", "--seed", "5",
               "--skip-grid-gate", "--expect-override", "3.0"])
    assert rc == 1


def test_entry_point_runs():
    res = run_cli(["exact", "--formula", "delta-beta", "--gamma", "1", "--beta", "1"])
    assert res.returncode == 0
    assert "value=1.0" in res.stdout
