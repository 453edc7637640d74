import csv
import json

import numpy as np
import pytest

from flexcd.cli import run_cli

SMALL = ["--synthetic", "quadratic", "--N", "30", "--m", "60", "--cond", "50", "--reg", "l1", "--c", "0.1"]


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_solve_logistic_from_file(tmp_path, capsys):
    data = tmp_path / "x.libsvm"
    assert run_cli(["gen-data", "--synthetic", "logistic", "--N", "40", "--m", "80", "--output", str(data)]) == 0
    out = tmp_path / "out"
    code = run_cli(["solve", "--data", str(data), "--loss", "logistic", "--reg", "l1", "--c", "0.1",
                    "--tau", "16", "--hessian", "diag", "--budget", "1000", "--out", str(out)])
    assert code == 0
    rows = read_csv(out / "fcd.csv")
    assert list(rows[0]) == ["k", "F", "alpha", "backtracks", "inner_iters", "res_norm", "time_s"]
    F = np.array([float(r["F"]) for r in rows])
    assert np.all(np.diff(F) <= 0)
    for name in ("fcd.json", "solve_long.csv", "solve_iters.png", "solve_time.png"):
        assert (out / name).stat().st_size > 0


def test_compare_four_algorithms(tmp_path):
    out = tmp_path / "cmp"
    code = run_cli(["compare", *SMALL, "--algos", "fcd-v1,fcd-v2,ucdc-v1,ucdc-v2", "--tau", "5",
                    "--budget", "300", "--out", str(out)])
    assert code == 0
    long_rows = read_csv(out / "compare_long.csv")
    algos = {r["algorithm"] for r in long_rows}
    assert algos == {"fcd-v1", "fcd-v2", "ucdc-v1", "ucdc-v2"}
    for a in algos:
        ks = [int(r["k"]) for r in long_rows if r["algorithm"] == a]
        assert ks[0] == 0 and len(read_csv(out / f"{a}.csv")) == len(ks) - 1
    assert (out / "compare_iters.png").exists() and (out / "compare_time.png").exists()


def test_deterministic_outputs_except_time(tmp_path):
    cols = ["k", "F", "alpha", "backtracks", "inner_iters", "res_norm"]
    runs = []
    for name in ("a", "b"):
        assert run_cli(["solve", *SMALL, "--tau", "4", "--budget", "200", "--seed", "3", "--no-plot",
                        "--out", str(tmp_path / name)]) == 0
        runs.append([[r[c] for c in cols] for r in read_csv(tmp_path / name / "fcd.csv")])
    assert runs[0] == runs[1]


def test_output_directory_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("FLEXCD_OUTPUT_DIR", str(tmp_path / "env"))
    assert run_cli(["solve", *SMALL, "--budget", "10", "--no-plot"]) == 0
    assert (tmp_path / "env" / "fcd.csv").exists()


def test_verify_bounds_trivial_target(tmp_path):
    out = tmp_path / "vb"
    code = run_cli(["verify-bounds", *SMALL, "--reg", "elastic", "--c2", "0.1", "--tau", "5",
                    "--hessian", "diag", "--theta", "0.5", "--epsilon", "1.0", "--trials", "5",
                    "--k-scale", "0.001", "--out", str(out)])
    assert code == 0
    report = json.loads((out / "bound_report.json").read_text())["report"]
    assert report["frequency"] == 1.0 and report["passed"]


def test_unknown_flag_exits_2(capsys):
    assert run_cli(["solve", "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err


def test_bad_values_exit_2(tmp_path):
    assert run_cli(["solve", *SMALL, "--eta", "1.5", "--out", str(tmp_path)]) == 2
    assert run_cli(["compare", *SMALL, "--algos", "newton", "--out", str(tmp_path)]) == 2
    assert run_cli(["solve", "--data", str(tmp_path / "missing.libsvm"), "--out", str(tmp_path)]) == 2


def test_malformed_data_exits_2(tmp_path):
    bad = tmp_path / "bad.libsvm"
    bad.write_text("1 2:1 1:1\n")
    assert run_cli(["solve", "--data", str(bad), "--out", str(tmp_path)]) == 2


def test_solver_failure_exits_3(tmp_path):
    code = run_cli(["solve", *SMALL, "--tau", "5", "--hessian", "minor", "--inner", "prox", "--eta", "0",
                    "--inner-max", "1", "--strict-certificates", "--out", str(tmp_path), "--no-plot"])
    assert code == 3


def test_help_exits_0():
    assert run_cli(["--help"]) == 0
