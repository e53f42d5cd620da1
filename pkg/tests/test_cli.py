import json
import os
import subprocess
import sys

import pytest

from ballsbins import cli


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def read_all(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_simulate_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "a"
    code, _, _ = run_cli(capsys, "simulate", "--n", "16", "--rounds", "10", "--seed", "1", "--trials", "2",
                         "--out", str(out))
    assert code == 0
    files = read_all(out)
    assert set(files) == {"manifest.json", "summary.json", "trial_0000.csv", "trial_0001.csv"}
    lines = files["trial_0000.csv"].decode().splitlines()
    assert lines[0] == cli.CSV_HEADER.strip()
    assert len(lines) == 12
    assert lines[1].startswith("0,")
    summary = json.loads(files["summary.json"])
    assert summary["spec"]["n"] == 16 and len(summary["per_trial"]) == 2


def test_outputs_are_byte_identical(tmp_path, capsys):
    args = ["couple", "--n", "16", "--rounds", "50", "--seed", "4", "--trials", "2"]
    run_cli(capsys, *args, "--out", str(tmp_path / "x"))
    run_cli(capsys, *args, "--out", str(tmp_path / "y"))
    assert read_all(tmp_path / "x") == read_all(tmp_path / "y")


def test_stdout_json_and_fractions(capsys):
    code, out, _ = run_cli(capsys, "exact", "--n", "2", "--trials", "20000")
    assert code == 0
    d = json.loads(out)
    assert d["exact"]["P[X1=0,X2=0]"] == {"num": 1, "den": 8}
    assert d["checks"]["negative_association_fails"] is True


def test_bounds_command(capsys):
    code, out, _ = run_cli(capsys, "bounds", "--n", "1024", "--beta", "2")
    d = json.loads(out)
    assert code == 0 and d["between_empty_threshold"] == pytest.approx(532.337034670038)


@pytest.mark.parametrize("argv", [
    ["couple", "--n", "10"],
    ["couple", "--n", "16", "--topology", "ring"],
    ["simulate", "--bogus"],
    ["simulate", "--n", "1"],
    ["tetris", "--n", "16", "--topology", "ring"],
    ["exact", "--n", "9"],
    ["cover", "--n", "8", "--fault-period", "5"],
    [],
])
def test_invalid_input_exits_1(argv, capsys):
    code, _, err = run_cli(capsys, *argv)
    assert code == 1 and "error" in err


def test_unwritable_out(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("")
    code, _, _ = run_cli(capsys, "simulate", "--n", "8", "--out", str(blocker / "sub"))
    assert code == 1


def test_help_exits_0(capsys):
    assert cli.main(["--help"]) == 0
    assert cli.main(["simulate", "--help"]) == 0


def test_internal_error_exits_2_after_manifest(tmp_path, capsys, monkeypatch):
    def boom(*a, **k):
        raise RuntimeError("kernel fell over")

    monkeypatch.setattr(cli, "run_experiment", boom)
    code, _, _ = run_cli(capsys, "simulate", "--n", "8", "--out", str(tmp_path))
    assert code == 2
    assert (tmp_path / "manifest.json").exists() and not (tmp_path / "summary.json").exists()


def test_spec_file_and_override(tmp_path, capsys):
    f = tmp_path / "run.cfg"
    f.write_text("n = 32\nrounds = 40\nseed = 5  # comment\nstrategy = LIFO\n")
    code, out, _ = run_cli(capsys, "simulate", "--spec", str(f), "--rounds", "7")
    spec = json.loads(out)["spec"]
    assert code == 0
    assert (spec["n"], spec["T"], spec["seed"], spec["strategy"]) == (32, 7, 5, "LIFO")


@pytest.mark.parametrize("body", ["bogus = 1\n", "n = many\n", "kind = tetris\n"])
def test_bad_spec_file(tmp_path, capsys, body):
    f = tmp_path / "bad.cfg"
    f.write_text(body)
    code, _, _ = run_cli(capsys, "simulate", "--spec", str(f))
    assert code == 1


def test_ring_simulate_is_conjecture(capsys):
    code, out, _ = run_cli(capsys, "simulate", "--n", "16", "--topology", "ring", "--rounds", "20")
    assert json.loads(out)["spec"]["kind"] == "conjecture"


def test_adversary_defaults(capsys):
    code, out, _ = run_cli(capsys, "adversary", "--n", "16", "--seed", "2")
    d = json.loads(out)
    assert code == 0 and d["spec"]["fault_period"] == 128
    assert "slowdown" in d["per_trial"][0]


def test_suite(tmp_path, capsys):
    code, _, _ = run_cli(capsys, "suite", "--n", "16", "--trials", "1", "--kinds", "stability,couple,exact_check",
                         "--out", str(tmp_path))
    assert code == 0
    assert {p.name for p in tmp_path.iterdir()} == {"manifest.json", "summary.json", "stability", "couple",
                                                     "exact_check"}


def test_module_entry_point():
    env = dict(os.environ, BALLSBINS_BACKEND="numpy")
    r = subprocess.run([sys.executable, "-m", "ballsbins", "bounds", "--n", "64"], capture_output=True,
                       text=True, env=env)
    assert r.returncode == 0 and "emptying_exponent" in r.stdout
