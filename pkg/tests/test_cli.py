import csv
import json
import shutil
from fractions import Fraction
from pathlib import Path

import pytest

from otprop.cli import RESULT_COLUMNS, main
from otprop.data_io import builtin_path

FIXTURES = Path(__file__).parent / "fixtures"
# fixtures/eval_*.csv scored by pair enumeration and 40-digit arithmetic
FIXTURE_NMI = 0.5525007787839654959662146
FIXTURE_ARI = Fraction(2147, 4286)


@pytest.fixture
def iris_csv(tmp_path):
    return shutil.copy(builtin_path("iris"), tmp_path / "iris.csv")


def _error(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1])


def _run(tmp_path, *extra):
    return main(["run", "--output", str(tmp_path / "p.csv"), "--trace", str(tmp_path / "t.json"), *extra])


def test_run_iris(tmp_path, iris_csv, capsys):
    code = _run(tmp_path, "--data", str(iris_csv), "--label-col", "species",
                "--labeled-fraction", "0.25", "--seed", "7")
    assert code == 0
    with open(tmp_path / "p.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 150
    assert all(r["predicted_label"] in {"setosa", "versicolor", "virginica"} for r in rows)
    summary = json.loads(capsys.readouterr().out)
    assert summary["n_seed"] + summary["n_pseudo"] == 150

    trace = json.loads((tmp_path / "t.json").read_text())
    assert trace["iterations"][-1]["n_t"] == 0
    manifest = json.loads((tmp_path / "t.manifest.json").read_text())
    assert manifest["config"] == trace["config"]
    for key in ("sinkhorn_epsilon", "alpha", "standardize", "stratified", "seed", "labeled_fraction"):
        assert key in manifest["config"]
    assert len(manifest["dataset_sha256"]) == 64
    assert set(manifest["timings"]) == {"load_ms", "split_ms", "propagate_ms", "write_ms"}


def test_pseudo_rows_are_non_seed_rows(tmp_path):
    assert _run(tmp_path, "--data", "iris", "--labeled-fraction", "0.15", "--seed", "1") == 0
    with open(tmp_path / "p.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    seed_rows = {int(r["row_index"]) for r in rows if r["origin"] == "seed"}
    pseudo_rows = {int(r["row_index"]) for r in rows if r["origin"] == "pseudo"}
    assert seed_rows.isdisjoint(pseudo_rows)
    assert seed_rows | pseudo_rows == set(range(150))
    assert len(seed_rows) == 3 * 8  # ceil(0.15 * 50) per class
    assert all(int(r["iteration_assigned"]) >= 1 for r in rows if r["origin"] == "pseudo")


def test_run_without_fraction_uses_empty_cells(tmp_path, capsys):
    data = tmp_path / "partial.csv"
    lines = builtin_path("iris").read_text().splitlines()
    kept = {1, 2, 51, 52, 101, 102}  # header is line 0
    out = [lines[0]] + [
        line if i in kept else line.rsplit(",", 1)[0] + "," for i, line in enumerate(lines) if i
    ]
    data.write_text("\n".join(out) + "\n")
    assert _run(tmp_path, "--data", str(data), "--label-col", "species") == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["n_seed"] == 6 and "nmi" not in summary


def test_missing_data(capsys):
    assert main(["run"]) == 1
    err = capsys.readouterr().err
    assert err.startswith("usage:")
    assert json.loads(err.strip().splitlines()[-1])["error"] == "usage"


def test_alpha_out_of_range(tmp_path, capsys):
    assert _run(tmp_path, "--data", "iris", "--labeled-fraction", "0.25", "--alpha", "1.5") == 1
    assert "alpha" in _error(capsys)["message"]


@pytest.mark.parametrize(
    "args",
    [
        ["--data", "nowhere.csv", "--label-col", "y"],
        ["--data", "iris", "--label-col", "colour", "--labeled-fraction", "0.2"],
        ["--data", "iris", "--labeled-fraction", "0.01"],
        ["--data", "iris"],  # fully labeled, nothing to propagate
        ["--data", "iris", "--labeled-fraction", "0.2", "--epsilon", "-1"],
    ],
)
def test_validation_errors(tmp_path, capsys, args):
    assert _run(tmp_path, *args) == 1
    assert set(_error(capsys)) == {"error", "message"}


def test_not_converged_exit_code(tmp_path, capsys):
    code = _run(tmp_path, "--data", "iris", "--labeled-fraction", "0.2",
                "--epsilon", "0.001", "--max-iterations", "1", "--tol", "1e-15")
    assert code == 2
    assert _error(capsys)["error"] == "NotConverged"


def test_bench_single_cell(tmp_path, capsys):
    out = tmp_path / "r.csv"
    assert main(["bench", "--data", "iris", "--fractions", "0.25", "--repeats", "1",
                 "--output", str(out)]) == 0
    with open(out, newline="") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    assert tuple(reader.fieldnames) == RESULT_COLUMNS
    assert len(rows) == 1
    assert float(rows[0]["std_nmi"]) == 0.0 and float(rows[0]["std_ari"]) == 0.0
    assert "iris" in capsys.readouterr().out


def test_bench_table_order(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["bench", "--data", "iris", "--data", "heart", "--fractions", "0.35,0.05",
                 "--repeats", "2", "--output", str(out)]) == 0
    with open(out, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert [(r["dataset"], float(r["fraction"])) for r in rows] == [
        ("iris", 0.35), ("iris", 0.05), ("heart", 0.35), ("heart", 0.05)
    ]
    assert all(0 <= float(r["mean_nmi"]) <= 1 for r in rows)
    assert all(float(r["mean_iterations"]) >= 1 for r in rows)


def test_bench_bad_flags(tmp_path, capsys):
    assert main(["bench", "--data", "iris", "--repeats", "0", "--output", str(tmp_path / "r")]) == 1
    assert main(["bench", "--data", "iris", "--fractions", "a,b"]) == 1


def test_eval_identical(tmp_path, capsys):
    pred = tmp_path / "p.csv"
    with open(pred, "w") as fh:
        fh.write("row_index,predicted_label\n")
        for i, line in enumerate(builtin_path("iris").read_text().splitlines()[1:]):
            fh.write(f"{i},{line.rsplit(',', 1)[1]}\n")
    assert main(["eval", "--predictions", str(pred), "--truth", "iris"]) == 0
    assert json.loads(capsys.readouterr().out) == {"nmi": 1.0, "ari": 1.0}


def test_eval_orthogonal(tmp_path, capsys):
    truth = tmp_path / "t.csv"
    truth.write_text("x,y\n0,a\n1,a\n2,b\n3,b\n")
    pred = tmp_path / "p.csv"
    pred.write_text("row_index,predicted_label\n0,u\n1,v\n2,u\n3,v\n")
    assert main(["eval", "--predictions", str(pred), "--truth", str(truth), "--label-col", "y"]) == 0
    scores = json.loads(capsys.readouterr().out)
    assert scores["nmi"] == 0.0 and scores["ari"] <= 0.0


def test_eval_fixture(capsys):
    assert main(["eval", "--predictions", str(FIXTURES / "eval_pred.csv"),
                 "--truth", str(FIXTURES / "eval_truth.csv"), "--label-col", "colour"]) == 0
    scores = json.loads(capsys.readouterr().out)
    assert scores["nmi"] == pytest.approx(FIXTURE_NMI, abs=1e-12)
    assert scores["ari"] == float(FIXTURE_ARI)


def test_eval_misaligned(tmp_path, capsys):
    pred = tmp_path / "p.csv"
    pred.write_text("row_index,predicted_label\n0,a\n1,b\n7,a\n")
    truth = tmp_path / "t.csv"
    truth.write_text("x,y\n0,a\n1,b\n2,a\n")
    assert main(["eval", "--predictions", str(pred), "--truth", str(truth), "--label-col", "y"]) == 1
    assert "align" in _error(capsys)["message"]


def test_eval_pseudo_scope(tmp_path, capsys):
    assert _run(tmp_path, "--data", "iris", "--labeled-fraction", "0.25", "--seed", "2") == 0
    capsys.readouterr()
    assert main(["eval", "--predictions", str(tmp_path / "p.csv"), "--truth", "iris",
                 "--scope", "pseudo"]) == 0
    scores = json.loads(capsys.readouterr().out)
    assert 0 <= scores["nmi"] <= 1


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "otprop", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and "otprop" in proc.stdout
