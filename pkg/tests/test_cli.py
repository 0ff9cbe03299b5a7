import io
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from qscore import __version__
from qscore.cli import ExperimentConfig, main, parse_state
from qscore.estimation import bloch_rotation_family, crmc_bound
from qscore.exceptions import ValidationError


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


def result(*argv):
    code, out, err = run(*argv)
    assert code == 0, err
    return json.loads(out)


def test_score_matches_entropy_for_truthful_report():
    doc = result("score", "--state", "mixed", "--report", "mixed")
    assert float(doc["result"]["expected_report"]) == pytest.approx(1 - math.log(2))
    assert doc["version"] == __version__
    assert doc["config"]["command"] == "score"
    assert "jobs" not in doc["config"] and "out" not in doc["config"]


def test_divergence_support_leak_is_inf():
    doc = result("divergence", "--state", "mixed", "--report", "plus")
    assert doc["result"]["bregman"] == "inf" and doc["result"]["petz"] == "inf"


def test_coherence_of_plus():
    doc = result("coherence", "--state", "plus")
    assert float(doc["result"]["coherence"]) == pytest.approx(math.log(2), abs=1e-12)


def test_qfi_rotation_preset():
    doc = result("qfi", "--basis", "Z")
    assert float(doc["result"]["qfi"]) == pytest.approx(1.0, abs=1e-9)
    assert float(doc["result"]["cfi"]) == pytest.approx(0.0, abs=1e-9)


def test_bound_equals_library():
    doc = result("bound", "--n", "50")
    assert float(doc["result"]["bound"]) == crmc_bound(bloch_rotation_family(), [0.0], "log", 50)


def test_numbers_round_trip_exactly():
    doc = result("bound", "--n", "3")
    assert repr(float(doc["result"]["bound"])) == repr(crmc_bound(bloch_rotation_family(), [0.0], "log", 3))


def _write(tmp_path, *argv):
    path = tmp_path / "out.csv"
    code, out, err = run(*argv, "--out", str(path))
    assert code == 0, err
    return path


def test_simulate_csv_layout(tmp_path):
    path = _write(tmp_path, "simulate", "--state", "plus", "--ns", "8,16", "--trials", "50", "--seed", "3")
    lines = path.read_text().splitlines()
    assert lines[0] == f"# qscore-version: {__version__}"
    assert lines[1].startswith("# qscore-config: ")
    assert lines[2] == "n,strategy,generator,risk_mean,risk_stderr,trials,clamp_events,seed"
    assert [l.split(",")[0] for l in lines[3:]] == ["8", "16"]


def test_csv_bytes_independent_of_runs_and_jobs(tmp_path):
    args = ("advantage", "--dims", "2,3", "--ns", "8,16", "--trials", "40", "--seed", "5")
    a = _write(tmp_path, *args).read_bytes()
    b = _write(tmp_path, *args).read_bytes()
    c = _write(tmp_path, *args, "--jobs", "3").read_bytes()
    assert a == b == c


def test_replay_identical(tmp_path):
    path = _write(tmp_path, "simulate", "--strategy", "tomography", "--n", "12", "--trials", "30")
    code, out, _ = run("replay", str(path))
    assert code == 0 and "identical" in out


def test_replay_json(tmp_path):
    path = tmp_path / "bound.json"
    assert run("bound", "--family", "diagonal", "--out", str(path))[0] == 0
    assert run("replay", str(path))[0] == 0


def test_replay_detects_edit(tmp_path):
    path = _write(tmp_path, "simulate", "--n", "12", "--trials", "30")
    lines = path.read_text().splitlines(keepends=True)
    cells = lines[3].split(",")
    cells[3] = "0.5"
    lines[3] = ",".join(cells)
    path.write_text("".join(lines))
    code, _, err = run("replay", str(path))
    assert code == 1 and "risk_mean" in err and "row 1" in err


def test_replay_detects_json_edit(tmp_path):
    path = tmp_path / "s.json"
    run("score", "--out", str(path))
    doc = json.loads(path.read_text())
    doc["result"]["expected_report"] = "1"
    path.write_text(json.dumps(doc))
    code, _, err = run("replay", str(path))
    assert code == 1 and "expected_report" in err


def test_replay_version_skew_warns(tmp_path):
    path = _write(tmp_path, "simulate", "--n", "4", "--trials", "10")
    text = path.read_text().replace(f"# qscore-version: {__version__}", "# qscore-version: 0.0.1")
    path.write_text(text)
    code, _, err = run("replay", str(path))
    assert code == 0 and "warning" in err and "0.0.1" in err


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"state": "mixed", "report": "mixed", "generator": "quadratic"}))
    doc = result("score", "--config", str(cfg))
    assert doc["config"]["generator"] == "quadratic"
    doc = result("score", "--config", str(cfg), "--generator", "log")
    assert doc["config"]["generator"] == "log" and doc["config"]["state"] == "mixed"


def test_config_echo_round_trip():
    doc = result("bound", "--n", "7", "--bound-mode", "f2diag")
    cfg = ExperimentConfig.from_dict(doc["config"])
    assert cfg.n == 7 and cfg.bound_mode == "f2diag"
    assert cfg.echo() == doc["config"]


@pytest.mark.parametrize("argv, needle", [
    (("score", "--n", "0"), "n"),
    (("score", "--eps-floor", "0"), "eps_floor"),
    (("score", "--alpha", "-1"), "alpha"),
    (("score", "--generator", "cubic"), "cubic"),
    (("score", "--state", "nonsense"), "state"),
    (("score", "--stat", "plus"), "unrecognized"),
    (("advantage", "--dims", "7"), "dims"),
    (("simulate", "--ns", "10,5"), "ascending"),
    (("simulate", "--strategy", "psychic"), "strategy"),
])
def test_validation_exit_code(argv, needle):
    code, out, err = run(*argv)
    assert code == 2 and out == "" and needle in err


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"staet": "plus"}))
    code, _, err = run("score", "--config", str(cfg))
    assert code == 2 and "staet" in err


def test_io_errors(tmp_path):
    assert run("score", "--config", str(tmp_path / "missing.json"))[0] == 3
    assert run("replay", str(tmp_path / "missing.csv"))[0] == 3
    assert run("score", "--out", str(tmp_path / "no" / "dir.json"))[0] == 3


def test_parse_state_presets():
    assert np.allclose(parse_state("mixed(0.9)").data, 0.9 * parse_state("plus").data + 0.05 * np.eye(2))
    assert parse_state("fourier(3)").dim == 3
    assert np.allclose(parse_state("0,0,1").data, np.diag([1, 0]))
    assert np.allclose(parse_state('[[0.5, "0.5j"], ["-0.5j", 0.5]]').data, parse_state("bloch(0,-1,0)").data)
    with pytest.raises(ValidationError):
        parse_state("mixed(2)")


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qscore", "coherence", "--state", "fourier(3)"],
                          capture_output=True, text=True, check=True)
    assert float(json.loads(proc.stdout)["result"]["coherence"]) == pytest.approx(math.log(3), abs=1e-12)
