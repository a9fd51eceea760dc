import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from nehari_linking.cli import main
from nehari_linking.grid import ExteriorGrid
from nehari_linking.limit_problem import RadialProfile

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def runner():
    return CliRunner()


def _write(tmp_path, text, name="c.conf"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _quick(tmp_path, extra=""):
    return _write(tmp_path, (CONFIGS / "quick.conf").read_text() + extra)


def test_audit(runner, tmp_path):
    res = runner.invoke(main, ["audit", "--config", str(CONFIGS / "desk.conf"), "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    data = json.loads((tmp_path / "audit.json").read_text())
    assert data["pass"] and len(data["hypotheses"]) == 7 and len(data["config_hash"]) == 16


def test_audit_failure_exit_code(runner, tmp_path):
    cfg = _write(tmp_path, (CONFIGS / "desk.conf").read_text().replace("problem.s = 0.5", "problem.s = 2.0"))
    res = runner.invoke(main, ["audit", "--config", cfg, "--out", str(tmp_path / "o")])
    assert res.exit_code == 1
    data = json.loads((tmp_path / "o" / "audit.json").read_text())
    assert [h["name"] for h in data["hypotheses"] if not h["pass"]] == ["finfty"]


def test_config_error_exit_code(runner, tmp_path):
    cfg = _write(tmp_path, "problem.N = 2\n")
    res = runner.invoke(main, ["project", "--config", cfg])
    assert res.exit_code == 2
    assert "missing required field" in res.output


def test_ground_state_roundtrip(runner, tmp_path):
    res = runner.invoke(main, ["ground-state", "--config", _quick(tmp_path), "--out", str(tmp_path)])
    assert res.exit_code == 0, res.output
    assert (tmp_path / "profile.csv").read_text().startswith("# config_hash=")
    prof = RadialProfile.load(tmp_path / "profile.csv", tmp_path / "profile.json")
    meta = json.loads((tmp_path / "profile.json").read_text())
    assert prof.m == pytest.approx(20.286157531, rel=1e-8)
    assert meta["fit_quality"] <= 0.02


def test_project_is_deterministic(runner, tmp_path):
    cfg = _quick(tmp_path)
    for d in ("a", "b"):
        res = runner.invoke(main, ["project", "--config", cfg, "--out", str(tmp_path / d), "--threads", "2"])
        assert res.exit_code == 0, res.output
    a = (tmp_path / "a" / "projection.json").read_text()
    assert a == (tmp_path / "b" / "projection.json").read_text()
    rows = json.loads(a)["rows"]
    assert rows[0]["R"] == 4.0 and rows[0]["tau"] > 1.0


def test_descent_and_diagnose(runner, tmp_path):
    cfg = _quick(tmp_path)
    out = tmp_path / "run"
    res = runner.invoke(main, ["solve", "--mode", "descent", "--config", cfg, "--out", str(out)])
    assert res.exit_code == 0, res.output
    report = json.loads((out / "report.json").read_text())
    assert report["status"] == "Escaped"
    u, header = ExteriorGrid.load_field(out / "solution.field")
    assert header["meta"]["config_hash"] == report["config_hash"]
    res = runner.invoke(main, ["diagnose", "--config", cfg, "--run-dir", str(out)])
    assert res.exit_code == 0, res.output
    diag = json.loads((out / "diagnose.json").read_text())
    assert diag["splitting_suspected"] and diag["drift_increasing_tail"]


def test_link_scan(runner, tmp_path):
    extra = "linking.R_list = 8\nlinking.y_samples = 4\nlinking.t_samples = 5\nlinking.n_theta = 4\n"
    cfg = _write(tmp_path, (CONFIGS / "desk.conf").read_text().replace("linking.R_list = 8, 12, 16\n", "")
                 .replace("linking.t_samples = 21\n", "").replace("linking.y_samples = 16\n", "") + extra)
    res = runner.invoke(main, ["link-scan", "--config", cfg, "--out", str(tmp_path / "s")])
    assert res.exit_code == 0, res.output
    data = json.loads((tmp_path / "s" / "link_scan.json").read_text())
    v = data["verdicts"][0]
    assert v["inequalities"] == {"cap": True, "supinf": True, "window": True}
    text = (tmp_path / "s" / "scan_R8.csv").read_text().splitlines()
    assert text[0].startswith("# config_hash=") and len(text) == 2 + 4 * 5


def test_linking_solve_small_obstacle(runner, tmp_path):
    base = (CONFIGS / "small_obstacle.conf").read_text()
    base = base.replace("linking.t_samples = 21", "linking.t_samples = 5").replace(
        "linking.y_samples = 16", "linking.y_samples = 4")
    cfg = _write(tmp_path, base + "linking.n_theta = 4\n")
    out = tmp_path / "lk"
    res = runner.invoke(main, ["solve", "--config", cfg, "--out", str(out)])
    report = json.loads((out / "report.json").read_text())
    assert res.exit_code == 0, res.output
    assert report["status"] == "Converged"
    assert report["margins"]["above_m"] > 0.01 * report["m"]
    assert report["margins"]["below_2m"] > 0.01 * report["m"]
    rows = (out / "run_log.jsonl").read_text().splitlines()
    assert all(json.loads(r)["energy"] >= json.loads(s)["energy"] for r, s in zip(rows, rows[1:]))
    assert np.isfinite(report["residual"])
