import json
import os
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from lowdeg.cli import main

DATA = Path(__file__).parent / "data"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_sample_is_deterministic(tmp_path, capsys):
    for sub in ("a", "b"):
        assert run(capsys, "sample", "--n", 1, "--d", 2, "--count", 1, "--seed", 7, "--out", tmp_path / sub)[0] == 0
    a, b = (tmp_path / "a" / "poly_0000.json").read_bytes(), (tmp_path / "b" / "poly_0000.json").read_bytes()
    assert a == b
    assert json.loads(a)["d"] == 2 and len(json.loads(a)["coeffs"]) == 3


def test_sample_edge_cases(tmp_path, capsys):
    code, out, _ = run(capsys, "sample", "--n", 2, "--d", 3, "--count", 0, "--out", tmp_path / "z")
    assert code == 0 and json.loads(out)["files"] == []
    assert json.loads((tmp_path / "z" / "manifest.json").read_text())["count"] == 0
    run(capsys, "sample", "--n", 2, "--d", 0, "--count", 1, "--out", tmp_path / "c")
    assert len(json.loads((tmp_path / "c" / "poly_0000.json").read_text())["coeffs"]) == 1


def test_sample_unwritable(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code, _, err = run(capsys, "sample", "--n", 1, "--d", 2, "--out", blocker / "sub")
    assert code == 2 and "cannot write" in err


def test_decompose_fixture(tmp_path, capsys):
    code, out, _ = run(capsys, "decompose", DATA / "x0_squared.json", "--out", tmp_path)
    assert code == 0
    res = json.loads(out)
    parts = {p["l"]: p["poly"]["coeffs"] for p in res["parts"][0]}
    assert parts[0] == pytest.approx([1 / 3])
    assert parts[2] == pytest.approx([2 / 3, 0, 0, -1 / 3, 0, -1 / 3])
    assert [e["l"] for e in res["components"][0]] == [0, 2]
    assert (tmp_path / "decomposition.json").exists()


def test_norms_fixture(capsys):
    code, out, _ = run(capsys, "norms", DATA / "x0_pow7.json", "--q", 1, "--r", 1, "--mesh-level", 3)
    res = json.loads(out)
    assert code == 0 and res["bw"] == pytest.approx(1.0, abs=1e-15)
    assert res["cr"] >= 1.0 and res["mesh"]["level"] == 3


def test_topology_sextics(tmp_path, capsys):
    oracle = json.loads((DATA / "sextic_oracle.json").read_text())
    for name, file in (("separate", "sextic_separate.json"), ("nested", "sextic_nested.json")):
        code, out, _ = run(capsys, "topology", DATA / file, "--strict")
        res = json.loads(out)
        assert code == 0 and res["status"] == "resolved"
        assert (res["components"], res["tree"]) == (oracle[name]["components"], oracle[name]["tree"])


def test_topology_strict_unresolved(capsys):
    code, out, _ = run(capsys, "topology", DATA / "x0_squared.json", "--W", "CriticalPoints", "--strict")
    assert code == 1 and json.loads(out)["status"] == "unresolved"
    code, out, _ = run(capsys, "topology", DATA / "x0_squared.json", "--W", "CriticalPoints")
    assert code == 0


def test_parse_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 2,\n "d": }')
    code, _, err = run(capsys, "decompose", bad)
    assert code == 2 and "line 2" in err
    bad.write_text('{"n": 2, "coeffs": [1]}')
    code, _, err = run(capsys, "norms", bad)
    assert code == 2 and "'d'" in err
    assert run(capsys, "topology", DATA / "x0_squared.json", "--W", "Cusp")[0] == 2
    assert run(capsys, "experiment", "--regime", "cubic")[0] == 2
    assert run(capsys, "frobnicate")[0] == 2
    assert run(capsys, "decompose", tmp_path / "missing.json")[0] == 2


def test_config_file_errors(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n = 1\ntrials = lots\n")
    code, _, err = run(capsys, "experiment", "--config", cfg)
    assert code == 2 and "line 2" in err and "trials" in err


def test_experiment_flags_override_file(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("n = 1\ndegrees = 12\ntrials = 50\nb = 1,3\n")
    code, out, _ = run(capsys, "experiment", "--config", cfg, "--trials", 4, "--seed", 2,
                       "--workers", 1, "--verbose", "--out", tmp_path / "o")
    assert code == 0
    man = json.loads((tmp_path / "o" / "low_degree.manifest.json").read_text())
    assert man["config"]["trials"] == 4 and man["config"]["seed"] == 2 and man["config"]["degrees"] == [12]
    assert len(man["trials"]) == 8
    assert json.loads(out)["config_hash"] == man["config_hash"]


def test_betti_and_calibrate(tmp_path, capsys):
    code, out, _ = run(capsys, "betti", "--n", 1, "--degrees", "10,20", "--trials", 20, "--C", 2.5, "--workers", 1)
    assert code == 0 and all(r["p"] == 0.0 for r in json.loads(out)["rows"])
    code, out, _ = run(capsys, "calibrate", "--degrees", "16", "--trials", 10, "--b", "1", "--workers", 1,
                       "--c1-values", "1,10", "--out", tmp_path)
    res = json.loads(out)
    assert code == 0 and len(res["rows"]) == 2 and res["thresholds"][0]["target"] == 0.9
    assert (tmp_path / "calibration.csv").exists() and (tmp_path / "calibration.manifest.json").exists()


def test_inequality_command(capsys):
    code, out, _ = run(capsys, "inequality", "--d-min", 5, "--d-max", 6, "--samples", 2)
    res = json.loads(out)
    assert code in (0, 1) and res["q"] == 1.5 and res["seeley"]["0,0,0"]["exact_one"]
    assert run(capsys, "inequality", "--q", "0.5")[0] == 2


@pytest.mark.skipif(shutil.which("lowdeg") is None, reason="console script not installed")
def test_console_script(tmp_path):
    r = subprocess.run(["lowdeg", "norms", str(DATA / "x0_pow7.json")], capture_output=True, text=True,
                       env={**os.environ, "PYTHONPATH": os.pathsep.join(sys.path)})
    assert r.returncode == 0 and json.loads(r.stdout)["bw"] == pytest.approx(1.0)
