from __future__ import annotations

import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from fovopt.cli import main, parse_grid
from fovopt.errors import DomainError
from fovopt.io import read_sweep_csv, write_sweep_csv
from fovopt.model import DEFAULT_CONSTANTS
from fovopt.optimizer import default_bandwidth_grid, sweep
from fovopt.rate import get_profile


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def error_line(err):
    lines = err.strip().splitlines()
    assert len(lines) == 1
    return json.loads(lines[0])


def data_rows(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def test_eval_identity(capsys):
    code, out, _ = run(capsys, "eval", "--tau", 0, "--qhat", 0.5, "--shat", 0.5)
    assert code == 0
    assert out.splitlines()[0] == "Q = 5.0"


def test_optimize_prints_one_result(capsys):
    code, out, _ = run(capsys, "optimize", "--profile", "Balboa", "--B", 20, "--T", 5)
    assert code == 0
    doc = json.loads(out)
    assert doc["profile"] == "Balboa" and doc["feasible"] == 1
    assert doc["total_rate"] <= 20.0


def test_sweep_quality_column_nondecreasing(tmp_path, capsys):
    path = tmp_path / "m.csv"
    code, _, _ = run(capsys, "sweep", "--profile", "Balboa", "--policy", "model-fully-discrete",
                     "--T", 5, "-o", path)
    assert code == 0
    q = [float(r["q_norm"]) for r in data_rows(path) if r["feasible"] == "1"]
    assert len(q) > 50
    assert np.all(np.diff(q) >= 0)


def test_sweep_to_stdout_has_traceable_header(capsys):
    code, out, _ = run(capsys, "sweep", "--profile", "Balboa", "--T", 5, "--B-grid", "8,16,32")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("# fovopt ") and "config_sha256=" in lines[0]
    assert lines[1].startswith("# config=")
    assert len(lines) == 3 + 3


def test_bdrate_model_vs_heuristic_negative(tmp_path, capsys):
    for pol in ("model-fully-discrete", "heuristic"):
        assert run(capsys, "sweep", "--profile", "Balboa", "--policy", pol, "--T", 5,
                   "-o", tmp_path / f"{pol}.csv")[0] == 0
    code, out, _ = run(capsys, "bdrate", tmp_path / "model-fully-discrete.csv",
                       tmp_path / "heuristic.csv")
    assert code == 0
    header, row = out.strip().splitlines()
    assert header.startswith("profile,bd_rate_percent")
    assert row.startswith("Balboa,") and float(row.split(",")[1]) < 0
    code, out, _ = run(capsys, "bdrate", tmp_path / "model-fully-discrete.csv",
                       tmp_path / "heuristic.csv", "--json")
    assert json.loads(out)["bd_rate_percent"] < 0


@pytest.mark.parametrize("policy", ["model-continuous", "model-discrete-s",
                                    "model-fully-discrete", "heuristic"])
def test_sweep_csv_roundtrip(tmp_path, policy):
    p = get_profile("Hangpai2")
    curve = sweep(p, DEFAULT_CONSTANTS, policy, default_bandwidth_grid(p, n=40), 2.0)
    write_sweep_csv(curve, tmp_path / "s.csv")
    again = read_sweep_csv(tmp_path / "s.csv")
    assert again == curve
    write_sweep_csv(again, tmp_path / "s2.csv")
    assert (tmp_path / "s.csv").read_bytes() == (tmp_path / "s2.csv").read_bytes()


def test_equal_seeds_are_byte_identical(tmp_path, capsys):
    outs = []
    for tag, seed in (("a", 7), ("b", 7), ("c", 8)):
        ratings = tmp_path / f"r{tag}.csv"
        assert run(capsys, "synth", "--videos", 2, "--subjects", 6, "--design", "q,s",
                   "--seed", seed, "-o", ratings)[0] == 0
        consts = tmp_path / f"c{tag}.json"
        report = tmp_path / f"rep{tag}.json"
        assert run(capsys, "fit", ratings, "--seed", seed, "-o", consts,
                   "--report", report)[0] == 0
        outs.append((ratings.read_bytes(), consts.read_bytes(), report.read_bytes()))
    assert outs[0] == outs[1]
    assert outs[0][0] != outs[2][0]


def test_fit_output_loads_as_constants(tmp_path, capsys):
    ratings = tmp_path / "r.csv"
    run(capsys, "synth", "--videos", 2, "--subjects", 8, "--seed", 1, "-o", ratings)
    consts = tmp_path / "c.json"
    code, out, _ = run(capsys, "fit", ratings, "-o", consts)
    assert code == 0
    assert "rmse_final" in json.loads(out)
    code, out, _ = run(capsys, "eval", "--tau", 1, "--qhat", 1, "--shat", 1, "--constants", consts)
    assert code == 0 and out.startswith("Q = ")


def test_simulate_command(tmp_path, capsys):
    (tmp_path / "t.csv").write_text("time,bandwidth\n0,2\n10,8\n20,8\n")
    (tmp_path / "e.csv").write_text("time,tile_rates\n5,0.3;0.2\n15,0.3;0.2\n")
    code, out, _ = run(capsys, "simulate", "--profile", "Balboa", "--policy", "heuristic",
                       "--T", 5, "--trace", tmp_path / "t.csv", "--events", tmp_path / "e.csv",
                       "-o", tmp_path / "rep.csv", "--summary", tmp_path / "rep.json")
    assert code == 0
    assert json.loads(out)["n_events"] == 2
    assert [r["s_hat"] for r in data_rows(tmp_path / "rep.csv")] == ["0.25", "1.0"]
    assert json.loads((tmp_path / "rep.json").read_text())["n_infeasible"] == 0


# ---------------------------------------------------------------------------
# errors


def test_infeasible_exit_and_error_line(capsys):
    code, out, err = run(capsys, "optimize", "--profile", "Balboa", "--B", 1, "--T", 5)
    assert code == 5 and out == ""
    doc = error_line(err)
    assert doc["error"] == "Infeasible" and doc["min_bandwidth"] > 5.95


def test_parse_error_has_path_and_line(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("# fovopt\nB,qp,q,q_hat,s_hat,tau,rl_rate,total_rate,q_norm,feasible\n"
                    "1.0,22,8.0,1.0,1.0,0.5,1.0,2.0,0.9,1\n2.0,22,8.0\n")
    code, _, err = run(capsys, "bdrate", path, path)
    assert code == 3
    doc = error_line(err)
    assert doc["path"] == str(path) and doc["line"] == 4


def test_missing_file(tmp_path, capsys):
    code, _, err = run(capsys, "fit", tmp_path / "nope.csv")
    assert code == 3
    assert error_line(err)["path"] == str(tmp_path / "nope.csv")


def test_unknown_profile(capsys):
    code, _, err = run(capsys, "optimize", "--profile", "Nope", "--B", 10, "--T", 5)
    assert code == 3 and "Nope" in error_line(err)["message"]


def test_domain_error_exit(capsys):
    code, _, err = run(capsys, "eval", "--tau", -1, "--qhat", 0.5, "--shat", 0.5)
    assert code == 4 and error_line(err)["error"] == "DomainError"


def test_profiles_env_var(tmp_path, monkeypatch, capsys):
    path = tmp_path / "p.json"
    path.write_text(json.dumps([{"name": "Mine", "r_max": 10, "alpha": 1, "beta": 1,
                                 "r_fov": 1}]))
    monkeypatch.setenv("FOVOPT_PROFILES", str(path))
    code, out, _ = run(capsys, "optimize", "--profile", "Mine", "--B", 5, "--T", 5)
    assert code == 0 and json.loads(out)["profile"] == "Mine"


@pytest.mark.parametrize("text, want", [
    ("1:100:3", [1.0, 10.0, 100.0]),
    ("geom:1:100:3", [1.0, 10.0, 100.0]),
    ("lin:0.5:2.5:3", [0.5, 1.5, 2.5]),
    ("2,3.5,9", [2.0, 3.5, 9.0]),
])
def test_parse_grid(text, want):
    np.testing.assert_allclose(parse_grid(text), want, rtol=1e-12)


@pytest.mark.parametrize("text", ["3,2", "0:5:3", "1:5", "a,b", "lin:1:2:1", "1,1"])
def test_parse_grid_rejects(text):
    with pytest.raises(DomainError):
        parse_grid(text)


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "fovopt.cli", "--version"],
                         capture_output=True, text=True, check=True)
    assert res.stdout.startswith("fovopt ")
