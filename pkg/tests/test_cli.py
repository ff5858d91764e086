import csv
import json
import subprocess
import sys

import pytest

from learnwsat.cli import EXIT_UNKNOWN, EXIT_USAGE, main
from learnwsat.cnf import parse_dimacs
from learnwsat.evaluator import Comparison

TRAIN_FLAGS = ["--epochs", "2", "--warmup-epochs", "1", "--batch-size", "4", "--max-flips-train", "500",
               "--val-max-tries", "2", "--val-max-flips", "500"]


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    assert main(["gen", "--n", "15", "--train", "8", "--val", "4", "--test", "5", "--seed", "2",
                 "--out", str(d / "ds")]) == 0
    assert main(["train", "--dataset", str(d / "ds"), "--out", str(d / "run"), *TRAIN_FLAGS]) == 0
    return d


def test_gen_layout(workdir):
    manifest = json.loads((workdir / "ds" / "manifest.json").read_text())
    assert [len(manifest["splits"][s]) for s in ("train", "val", "test")] == [8, 4, 5]
    assert manifest["config"]["seed"] == 2
    f = parse_dimacs((workdir / "ds" / "0000.cnf").read_bytes())
    assert (f.num_vars, f.num_clauses) == (15, 64)


def test_train_artifacts(workdir):
    run = workdir / "run"
    for name in ("policy.txt", "report.json", "training.csv", "training.png", "config.json"):
        assert (run / name).is_file(), name
    assert sorted(p.name for p in (run / "checkpoints").iterdir()) == [f"epoch_00{i}.txt" for i in range(3)]
    cfg = json.loads((run / "config.json").read_text())
    assert cfg["train"]["epochs"] == 2 and cfg["train"]["warmup_epochs"] == 1
    rows = list(csv.reader((run / "training.csv").open()))
    assert rows[0] == ["epoch", "val_m_flips", "best_so_far"] and len(rows) == 4


def test_solve_prints_model(workdir, capsys):
    cnf = workdir / "ds" / "0000.cnf"
    assert main(["solve", str(cnf), "--policy", str(workdir / "run" / "policy.txt")]) == 0
    out = capsys.readouterr().out.splitlines()
    assert "SAT" in out
    lits = [int(x) for line in out if line.startswith("v ") for x in line[2:].split()]
    assert lits[-1] == 0
    assignment = [lit > 0 for lit in lits[:-1]]
    f = parse_dimacs(cnf.read_bytes())
    assert all(any(assignment[abs(l) - 1] == (l > 0) for l in c) for c in f.clauses)
    assert any(line.startswith("c solver") for line in out)


def test_solve_unknown_exit_code(tmp_path, capsys):
    cnf = tmp_path / "unsat.cnf"
    cnf.write_text("p cnf 1 2\n1 0\n-1 0\n")
    assert main(["solve", str(cnf), "--walksat", "--max-flips", "5", "--max-tries", "2"]) == EXIT_UNKNOWN
    assert "UNKNOWN" in capsys.readouterr().out


def test_solve_trace(workdir, tmp_path):
    trace = tmp_path / "t.ndjson"
    main(["solve", str(workdir / "ds" / "0001.cnf"), "--policy", str(workdir / "run" / "policy.txt"),
          "--trace", str(trace)])
    recs = [json.loads(line) for line in trace.read_text().splitlines()]
    assert recs and all(abs(sum(r["probs"]) - 1) < 1e-9 for r in recs)
    assert all(r["action"] in r["candidates"] for r in recs)


def test_eval_and_compare(workdir, tmp_path):
    ds, pol = str(workdir / "ds"), str(workdir / "run" / "policy.txt")
    assert main(["eval", ds, "--walksat", "--max-flips", "2000", "--out", str(tmp_path / "ev")]) == 0
    summary = json.loads((tmp_path / "ev" / "summary.json").read_text())
    assert summary["instances"] == 5 and summary["config"]["max_flips"] == 2000
    assert (tmp_path / "ev" / "flips.png").is_file()
    assert main(["compare", ds, "--policy", pol, "--walksat-p", "0.5", "--walksat-p", "0.5",
                 "--out", str(tmp_path / "cmp")]) == 0
    parsed = Comparison.parse_csv((tmp_path / "cmp" / "comparison.csv").read_text())
    assert parsed[("m_flips", "walksat(p=0.5)")] >= 0
    assert (tmp_path / "cmp" / "comparison.png").is_file()


def test_noise_command(workdir, tmp_path):
    assert main(["noise", str(workdir / "ds"), "--policy", str(workdir / "run" / "policy.txt"),
                 "--count", "2", "--out", str(tmp_path / "nz")]) == 0
    rows = list(csv.DictReader((tmp_path / "nz" / "noise.csv").open()))
    assert rows and all(0 < float(r["p_noise"]) < 0.5 for r in rows)


def test_sweep_command(workdir, tmp_path):
    assert main(["sweep", "--dataset", str(workdir / "ds"), "--axis", "discount", "--values", "0.3,0.3",
                 "--max-flips", "500", "--max-tries", "2", "--out", str(tmp_path / "sw"), *TRAIN_FLAGS]) == 0
    rows = list(csv.DictReader((tmp_path / "sw" / "sweep.csv").open()))
    assert [r["value"] for r in rows] == ["0.3", "0.3", "walksat"]
    assert rows[0]["seed"] != rows[1]["seed"]
    assert (tmp_path / "sw" / "sweep.png").is_file()


def test_config_file_and_flag_precedence(workdir, tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"epochs": 1, "gamma": 0.9, "seed": 5}))
    assert main(["train", "--dataset", str(workdir / "ds"), "--out", str(tmp_path / "r"), "--config", str(cfg),
                 "--warmup-epochs", "0", "--max-flips-train", "300", "--val-max-flips", "300",
                 "--val-max-tries", "1", "--gamma", "0.7"]) == 0
    resolved = json.loads((tmp_path / "r" / "config.json").read_text())["train"]
    assert resolved["epochs"] == 1 and resolved["gamma"] == 0.7 and resolved["seed"] == 5


def test_env_seed(workdir, tmp_path, monkeypatch):
    monkeypatch.setenv("LEARNWSAT_SEED", "17")
    main(["eval", str(workdir / "ds"), "--walksat", "--out", str(tmp_path / "a")])
    assert json.loads((tmp_path / "a" / "summary.json").read_text())["config"]["seed"] == 17
    main(["eval", str(workdir / "ds"), "--walksat", "--seed", "3", "--out", str(tmp_path / "b")])
    assert json.loads((tmp_path / "b" / "summary.json").read_text())["config"]["seed"] == 3


@pytest.mark.parametrize("argv", [
    ["eval", "/nonexistent/dir", "--walksat", "--out", "x"],
    ["train", "--dataset", "/nonexistent", "--out", "x"],
    ["gen", "--k", "5", "--n", "10", "--out", "x"],
    ["solve", "/nonexistent.cnf", "--walksat"],
])
def test_usage_errors_exit_2(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(argv) == EXIT_USAGE


def test_empty_instance_directory(tmp_path):
    (tmp_path / "empty").mkdir()
    assert main(["eval", str(tmp_path / "empty"), "--walksat", "--out", str(tmp_path / "o")]) == EXIT_USAGE


def test_bad_env_value(workdir, tmp_path, monkeypatch):
    monkeypatch.setenv("LEARNWSAT_THREADS", "many")
    assert main(["eval", str(workdir / "ds"), "--walksat", "--out", str(tmp_path / "o")]) == EXIT_USAGE


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "learnwsat", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("gen", "train", "solve", "eval", "compare", "noise", "sweep"):
        assert cmd in proc.stdout
