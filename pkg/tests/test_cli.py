import json
import math

import numpy as np
import pytest

from shelab.cli import DEFAULTS, run


def read_json(path):
    return json.loads(path.read_text())


def write_config(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def test_osgood_check_example(tmp_path, capsys):
    code = run(["osgood-check", "--family", "power", "--params", "2", "--lower", "1",
                "--output-dir", str(tmp_path)])
    assert code == 0
    assert "finite, 0.785398" in capsys.readouterr().out
    doc = read_json(tmp_path / "osgood-check.json")
    assert doc["schema_version"] == 1


def test_hitting_time_example(tmp_path, capsys):
    code = run(["hitting-time", "--family", "power", "--params", "2", "--from", "1", "--to", "10",
                "--output-dir", str(tmp_path)])
    assert code == 0
    assert "hitting-time: 0.9" in capsys.readouterr().out
    lines = (tmp_path / "hitting-time.csv").read_text().splitlines()
    assert lines[1] == "A [level],N [level],T [time]"
    assert float(lines[2].split(",")[2]) == pytest.approx(0.9, rel=1e-10)


def test_hitting_time_to_infinity(tmp_path, capsys):
    assert run(["hitting-time", "--family", "affine", "--params", "1", "--from", "0",
                "--to", "inf", "--output-dir", str(tmp_path)]) == 0
    assert "hitting-time: inf" in capsys.readouterr().out


def test_simulate_is_deterministic(tmp_path):
    args = ["simulate", "--seed", "3", "--output-dir"]
    assert run(args + [str(tmp_path / "a")]) == 0
    assert run(args + [str(tmp_path / "b")]) == 0
    a, b = tmp_path / "a" / "simulate.csv", tmp_path / "b" / "simulate.csv"
    assert a.read_bytes() == b.read_bytes()
    header = a.read_text().splitlines()[1]
    assert header == "t [time],sup_u [field],inf_u [field],ceiling_hit [flag]"
    frames = np.load(tmp_path / "a" / "simulate.npy")
    assert frames.ndim == 2 and np.all(np.isfinite(frames))


def test_resolved_config_round_trip(tmp_path):
    assert run(["simulate", "--seed", "5", "--family", "power", "--params", "2",
                "--truncate", "4", "--output-dir", str(tmp_path / "a")]) == 0
    resolved = tmp_path / "a" / "simulate.resolved.json"
    assert read_json(resolved)["version"] == 1
    assert run(["simulate", "--config", str(resolved), "--output-dir", str(tmp_path / "b")]) == 0
    for suffix in (".csv", ".json", ".resolved.json", ".npy"):
        assert ((tmp_path / "a" / f"simulate{suffix}").read_bytes()
                == (tmp_path / "b" / f"simulate{suffix}").read_bytes())


def test_flags_override_config(tmp_path):
    cfg = write_config(tmp_path / "c.json", {"version": 1, "lower": 2.0})
    assert run(["osgood-check", "--config", cfg, "--lower", "1",
                "--output-dir", str(tmp_path)]) == 0
    assert read_json(tmp_path / "osgood-check.resolved.json")["lower"] == 1.0


@pytest.mark.parametrize("doc,location", [
    ({"version": 2}, "config.version"),
    ({"version": 1, "lowr": 1.0}, "lowr"),
    ({"version": 1, "command": "simulate"}, "config.command"),
    ({"version": 1, "family": "nope"}, "drift"),
])
def test_config_errors_exit_2(tmp_path, capsys, doc, location):
    cfg = write_config(tmp_path / "c.json", doc)
    assert run(["osgood-check", "--config", cfg, "--output-dir", str(tmp_path)]) == 2
    assert location in capsys.readouterr().err


def test_invalid_drift_in_simulate_exits_2(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json",
                       {"version": 1, "drift": {"family": "affine", "params": [-5.0]}})
    assert run(["simulate", "--config", cfg, "--output-dir", str(tmp_path)]) == 2
    assert "drift" in capsys.readouterr().err


def test_missing_config_exits_2(tmp_path):
    assert run(["osgood-check", "--config", str(tmp_path / "none.json")]) == 2


def test_numeric_failure_exits_1_with_report(tmp_path, capsys):
    # locally Lipschitz drift without truncation is refused by the solver
    assert run(["simulate", "--family", "power", "--params", "2",
                "--output-dir", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    report = tmp_path / "simulate.error.json"
    assert str(report) in err
    assert read_json(report)["command"] == "simulate"


def test_required_check_failure_exits_1(tmp_path):
    cfg = write_config(tmp_path / "c.json",
                       {"version": 1, "expect": {"value": 0.5, "tol": 1e-6}, "require": ["value"]})
    assert run(["hitting-time", "--config", cfg, "--output-dir", str(tmp_path)]) == 1
    cfg = write_config(tmp_path / "d.json",
                       {"version": 1, "expect": {"value": 0.9, "tol": 1e-6}, "require": ["value"]})
    assert run(["hitting-time", "--config", cfg, "--output-dir", str(tmp_path)]) == 0


def test_env_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv("SHELAB_OUTPUT_DIR", str(tmp_path / "env"))
    assert run(["kernel-selftest", "--n", "50", "--quiet"]) == 0
    assert (tmp_path / "env" / "kernel-selftest.json").exists()
    assert (tmp_path / "env" / "kernel-selftest.csv").exists()


def test_name_option(tmp_path):
    assert run(["osgood-check", "--name", "run1", "--output-dir", str(tmp_path), "--quiet"]) == 0
    assert (tmp_path / "run1.json").exists()


@pytest.mark.parametrize("argv", [
    ["ladder", "--levels", "2", "4"],
    ["blowup-scan", "--seeds", "2", "--levels", "2", "4"],
    ["verify-tails", "--reps", "1000"],
    ["verify-moments", "--reps", "1000", "--direction", "spatial"],
    ["verify-covariance", "--reps", "1000", "--g", "identity"],
    ["growth-scan", "--reps", "2", "--L", "10", "100"],
])
def test_every_subcommand_writes_artifacts(tmp_path, argv):
    code = run(argv + ["--output-dir", str(tmp_path), "--quiet"])
    assert code in (0, 1)
    name = argv[0]
    doc = read_json(tmp_path / f"{name}.json")
    assert doc["schema_version"] == 1
    csv_lines = (tmp_path / f"{name}.csv").read_text().splitlines()
    assert csv_lines[0].startswith("# schema=")
    assert "[" in csv_lines[1]


def test_csv_uses_17_digits(tmp_path):
    run(["osgood-check", "--family", "power", "--params", "2", "--lower", "1",
         "--output-dir", str(tmp_path), "--quiet"])
    text = (tmp_path / "osgood-check.csv").read_text()
    assert repr(math.pi / 4)[:17] in text or "0.78539816339744" in text


def test_defaults_cover_every_command():
    from shelab.cli import COMMANDS
    assert set(DEFAULTS) == set(COMMANDS)
