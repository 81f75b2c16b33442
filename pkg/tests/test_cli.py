import csv
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from syncgame import cli
from syncgame import scenario_file as sf


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        comment = fh.readline()
        rows = list(csv.reader(fh))
    return comment, rows[0], rows[1:]


def error_of(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_simulate_default_converges(tmp_path):
    assert cli.run(["simulate", "--out", str(tmp_path), "--require-convergence"]) == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    comment, header, rows = read_csv(tmp_path / "trajectory.csv")
    assert comment.strip() == f"# manifest_sha256={man['manifest_sha256']}"
    assert header[:4] == ["step", "time", "x_p0_r0", "x_p0_r1"]
    assert header[-3:] == ["pibar_p0", "pibar_p1", "pibar_p2"]
    assert len(header) == 2 + 9 + 9 + 3
    last = np.array(rows[-1], dtype=float)
    x, pi = last[2:11], last[11:20]
    for p in range(3):
        live = x[3 * p:3 * p + 3] > 1e-3
        assert np.ptp(pi[3 * p:3 * p + 3][live]) <= 0.05


def test_field_row_count(tmp_path):
    assert cli.run(["field", "--out", str(tmp_path)]) == 0
    _, header, rows = read_csv(tmp_path / "field.csv")
    assert header == ["a", "b", "da", "db"]
    # 20 x 20 grid on the first two strategies of population 0: 210 points lie on the simplex.
    assert len(rows) == 400 - 190
    a, b = np.array(rows, dtype=float)[:, :2].T
    assert np.all(a + b <= 1 + 1e-12)


def test_sweep_output(tmp_path):
    assert cli.run(["sweep", "--out", str(tmp_path), "--set", "sweep.workers=1"]) == 0
    _, header, rows = read_csv(tmp_path / "sweep.csv")
    assert header == ["alpha", "steps", "converged"]
    assert [float(r[0]) for r in rows] == [round(0.1 * k, 1) for k in range(11)]
    assert all(r[2] == "1" for r in rows)
    steps = [int(r[1]) for r in rows]
    assert steps[0] > steps[-1]


def test_agents_output(tmp_path):
    args = ["agents", "--out", str(tmp_path), "--set", "stochastic.runs=2",
            "--set", "stochastic.horizon=0.2", "--set", "stochastic.clock_rate=5",
            "--set", "stochastic.rate_bound=20"]
    assert cli.run(args) == 0
    _, header, rows = read_csv(tmp_path / "agents.csv")
    assert header[0] == "run" and header[-1] == "n_p2_r2"
    assert len(rows) == 2 * 3
    counts = np.array([r[-9:] for r in rows], dtype=int)
    np.testing.assert_array_equal(counts.reshape(-1, 3, 3).sum(axis=2), [[120, 180, 200]] * 6)


def test_equilibria_with_restriction(tmp_path):
    args = ["equilibria", "--out", str(tmp_path), "--set", "equilibria.grid=5",
            "--set", "protocol.kind=replicator"]
    doc = sf.default_document()
    doc["protocol"]["frozen"] = [1]
    doc["equilibria"] = {"restrict": [0, 1], "population": 0}
    path = tmp_path / "s.json"
    path.write_text(sf.dumps(doc))
    assert cli.run(args + ["--scenario", str(path)]) == 0
    rep = json.loads((tmp_path / "equilibria.json").read_text())
    assert rep["populations"] == [0, 1] and rep["seeds"] == 15
    assert {e["classification"] for e in rep["equilibria"]} == {"interior", "extinct"}
    for e in rep["equilibria"]:
        assert e["residual"] < 1e-6
        assert e["state"][1] == [0.4, 0.4, 0.2]


def test_generate_then_simulate(tmp_path):
    assert cli.run(["generate", "--out", str(tmp_path), "--seed", "3", "--populations", "2",
                    "--regions", "4"]) == 0
    first = (tmp_path / "scenario.json").read_bytes()
    assert cli.run(["generate", "--out", str(tmp_path), "--seed", "3", "--populations", "2",
                    "--regions", "4"]) == 0
    assert (tmp_path / "scenario.json").read_bytes() == first
    assert cli.run(["simulate", "--out", str(tmp_path / "run"), "--scenario",
                    str(tmp_path / "scenario.json")]) == 0


def test_unknown_key_exits_2(tmp_path, capsys):
    doc = sf.default_document()
    doc["integrator"] = {"step": 0.1}
    path = tmp_path / "s.json"
    path.write_text(sf.dumps(doc))
    assert cli.run(["simulate", "--scenario", str(path), "--out", str(tmp_path)]) == 2
    err = error_of(capsys)
    assert err["error"] == "validation" and err["path"] == "integrator.step"
    assert isinstance(err["line"], int)
    assert not (tmp_path / "trajectory.csv").exists()


def test_bad_override_exits_2(tmp_path, capsys):
    assert cli.run(["simulate", "--out", str(tmp_path), "--set", "protocol.alpha.0=2"]) == 2
    assert error_of(capsys)["path"] == "protocol.alpha.0"


def test_missing_file_exits_2(tmp_path, capsys):
    assert cli.run(["simulate", "--scenario", str(tmp_path / "none.json"),
                    "--out", str(tmp_path)]) == 2
    assert error_of(capsys)["error"] == "io"


def test_numerical_failure_exits_3(tmp_path, capsys):
    assert cli.run(["simulate", "--out", str(tmp_path), "--set",
                    "regions.0.reward_pool=1e308"]) == 3
    assert error_of(capsys)["error"] == "numerical"


def test_no_convergence_exits_4(tmp_path, capsys):
    args = ["simulate", "--out", str(tmp_path), "--set", "integrator.max_time=0.05"]
    assert cli.run(args) == 0
    assert cli.run(args + ["--require-convergence"]) == 4
    assert error_of(capsys)["error"] == "not_converged"


def test_rate_bound_exits_2(tmp_path, capsys):
    assert cli.run(["agents", "--out", str(tmp_path), "--set", "stochastic.rate_bound=0.1"]) == 2
    err = error_of(capsys)
    assert err["error"] == "rate_bound" and err["observed"] > 0.1


def test_seed_flag_recorded(tmp_path):
    assert cli.run(["simulate", "--out", str(tmp_path), "--seed", "42"]) == 0
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["seed"] == 42 and man["config"]["seed"] == 42


def test_manifest_reruns_identically(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.run(["agents", "--out", str(a), "--seed", "9", "--set", "stochastic.horizon=0.5",
                    "--set", "stochastic.rate_bound=20"]) == 0
    assert cli.run(["agents", "--out", str(b), "--scenario", str(a / "manifest.json")]) == 0
    for name in ("manifest.json", "agents.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_console_script_and_no_color(tmp_path):
    env = {**os.environ, "NO_COLOR": "1"}
    proc = subprocess.run([sys.executable, "-m", "syncgame.cli", "simulate", "-v", "--out",
                           str(tmp_path)], capture_output=True, text=True, env=env, check=True)
    assert "converged at step" in proc.stderr
    assert "\033[" not in proc.stderr


def test_color_formatter():
    import logging

    rec = logging.LogRecord("syncgame", logging.WARNING, "", 0, "hello", None, None)
    assert cli._Formatter(True).format(rec).startswith("\033[33m")
    assert cli._Formatter(False).format(rec) == "WARNING hello"


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["simulate", "--seed", "x"]])
def test_argparse_errors(argv):
    with pytest.raises(SystemExit) as info:
        cli.run(argv)
    assert info.value.code == 2
