import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from tailski.binsearch import classical_ratio
from tailski.cli import EXIT_CONFIG, EXIT_OK, EXIT_SOLVER, EXIT_VERIFY, SolutionFile, main
from tailski.model import X_MAX_ENV

SMALL = ["--a", "0.8", "--gamma", "1.2", "--delta", "0.05", "--tau", "0.01", "--epsilon", "1e-9"]


def _solve(tmp_path, flags, name="sol.json", extra=()):
    out = tmp_path / name
    assert main(["solve", *flags, "--out", str(out), *extra]) == EXIT_OK
    return out


@pytest.fixture(scope="module")
def small_solution(tmp_path_factory):
    return _solve(tmp_path_factory.mktemp("cli"), SMALL)


def test_solve_and_verify(small_solution, capsys):
    assert main(["verify", "--solution", str(small_solution)]) == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["pass"] and report["errors"] == []
    assert report["world"] == 2


def test_world_one_in_summary(tmp_path, capsys):
    _solve(tmp_path, ["--a", "0.5", "--gamma", "1.5", "--delta", "0.25", "--tau", "0.01"])
    assert "world=1" in capsys.readouterr().out


def test_solve_both_writes_two_files(tmp_path, capsys):
    flags = ["--a", "0.5", "--gamma", "1.5", "--delta", "0.05", "--tau", "0.05"]
    _solve(tmp_path, flags, extra=["--solver", "both"])
    out = capsys.readouterr().out
    assert (tmp_path / "sol.binsearch.json").exists()
    assert (tmp_path / "sol.lp.json").exists()
    assert "within_epsilon=True" in out


def test_regime_error_exit_code(tmp_path, capsys):
    code = main(["solve", "--a", "0.5", "--gamma", "2.5", "--delta", "0.1", "--out", str(tmp_path / "x.json")])
    assert code == EXIT_CONFIG
    assert "config error" in capsys.readouterr().err


def test_unreadable_solution_is_config_error(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert main(["verify", "--solution", str(bad)]) == EXIT_CONFIG


def test_deterministic_output(tmp_path, small_solution):
    again = _solve(tmp_path, SMALL, "again.json")
    assert again.read_bytes() == small_solution.read_bytes()


def test_round_trip_is_exact(small_solution):
    sol = SolutionFile.load(small_solution)
    assert SolutionFile.from_dict(json.loads(sol.dumps())).dumps() == sol.dumps()
    reloaded = SolutionFile.from_dict(json.loads(small_solution.read_text()))
    assert np.array_equal(reloaded.masses, sol.masses)
    assert reloaded.opt == sol.opt


def _edited(tmp_path, source, edit):
    data = json.loads(source.read_text())
    edit(data)
    path = tmp_path / "edited.json"
    path.write_text(json.dumps(data))
    return path


def test_inflated_infinity_mass_rejected(tmp_path, small_solution, capsys):
    def inflate(d):
        d["mass_inf"] += 0.1

    path = _edited(tmp_path, small_solution, inflate)
    assert main(["verify", "--solution", str(path)]) == EXIT_VERIFY
    report = json.loads(capsys.readouterr().out)
    assert "mass_violation" in report["errors"]


def test_scaled_masses_rejected(tmp_path, small_solution, capsys):
    def scale(d):
        d["masses"] = [1.01 * m for m in d["masses"]]
        d["mass_inf"] *= 1.01

    path = _edited(tmp_path, small_solution, scale)
    assert main(["verify", "--solution", str(path)]) == EXIT_VERIFY
    assert "normalization" in json.loads(capsys.readouterr().out)["errors"]


def test_export(small_solution, capsys):
    assert main(["export", "--solution", str(small_solution)]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(capsys.readouterr().out)))
    assert list(rows[0]) == ["t", "f", "cr", "badmass"]
    sol = SolutionFile.load(small_solution)
    # The grid runs past the support to the first points beyond L5.
    assert len(rows) > sol.masses.size + 1
    last = rows[-1]
    assert last["t"] == "inf"
    assert float(last["cr"]) == pytest.approx(1 + (1 / 0.8 - 1) * sol.mass_inf, abs=1e-15)
    bad = np.array([float(r["badmass"]) for r in rows])
    assert bad.max() <= 0.05 + 1e-9
    l5 = sol.config.bounds.l5
    suffix_rows = [float(r["badmass"]) for r in rows[:-1] if float(r["t"]) > l5 - 1e-9]
    assert suffix_rows and np.allclose(suffix_rows, 0.05, atol=1e-6)
    assert max(float(r["cr"]) for r in rows) <= sol.opt + 1e-7


def test_sweep(tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(["sweep", "--a", "0.5", "--gamma", "1.5", "--tau", "0.01", "--param", "delta",
                 "--start", "0.05", "--stop", "1.0", "--steps", "6", "--out", str(out)])
    assert code == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert list(rows[0]) == ["delta", "opt", "world", "suffix_mass"]
    opts = [float(r["opt"]) for r in rows]
    assert all(b <= a + 1e-9 for a, b in zip(opts, opts[1:]))
    assert opts[-1] == pytest.approx(classical_ratio(0.5), abs=2e-2)
    worlds = [int(r["world"]) for r in rows]
    assert worlds[0] == 2 and worlds[-1] == 1


def test_x_max_env_override(tmp_path, monkeypatch):
    flags = ["--a", "0.5", "--gamma", "1.5", "--delta", "0.05", "--tau", "0.01"]
    out = str(tmp_path / "x.json")
    # Here L_b = 2 and L5 = 3; the greedy needs room up to L5.
    monkeypatch.setenv(X_MAX_ENV, "2.2")
    assert main(["solve", *flags, "--out", out]) == EXIT_SOLVER
    monkeypatch.setenv(X_MAX_ENV, "1.5")
    assert main(["solve", *flags, "--out", out]) == EXIT_CONFIG
    monkeypatch.setenv(X_MAX_ENV, "oops")
    assert main(["solve", *flags, "--out", out]) == EXIT_CONFIG
    monkeypatch.setenv(X_MAX_ENV, "50")
    assert main(["solve", *flags, "--out", out]) == EXIT_OK


def test_module_entry_point(tmp_path):
    out = tmp_path / "m.json"
    proc = subprocess.run(
        [sys.executable, "-m", "tailski", "solve", "--a", "0.5", "--gamma", "1.5", "--delta", "1",
         "--tau", "0.05", "--out", str(out)],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
