import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from funcband.bands import read_band_csv
from funcband.cli import main
from funcband.evaluation import REPORT_COLUMNS, read_report


def run_cli(*argv):
    return main([str(arg) for arg in argv])


@pytest.fixture(scope="module")
def series_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "series.csv"
    assert run_cli("simulate", "--case", "I", "--n", 80, "--seed", 7, "--output", path) == 0
    return path


def test_simulate_twice_byte_identical(tmp_path):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_cli("simulate", "--case", "I", "--n", 100, "--seed", 7, "--output", first) == 0
    assert run_cli("simulate", "--case", "I", "--n", 100, "--seed", 7, "--output", second) == 0
    assert first.read_bytes() == second.read_bytes()
    assert len(first.read_text().splitlines()) == 101


def test_simulate_case_three_echo(tmp_path):
    out = tmp_path / "s.csv"
    assert run_cli("simulate", "--case", "III", "--n", 20, "--output", out) == 0
    echo = json.loads((tmp_path / "s.csv.json").read_text())
    assert echo["case"] == "III"
    assert echo["dgp"]["b"] == 0.4
    assert echo["dgp"]["c"] == 0.8
    assert echo["dgp"]["J"] == 21
    assert echo["dgp"]["burn_in"] == 100


def test_simulate_invalid_case_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli("simulate", "--case", "IV", "--output", tmp_path / "x.csv")
    assert exc.value.code != 0
    assert "invalid choice" in capsys.readouterr().err


def test_forecast_mean_band_ordering(series_csv, tmp_path):
    out = tmp_path / "fc"
    code = run_cli("forecast", "--input", series_csv, "--output", out, "--predictor", "mean",
                   "--alpha", 0.2, "--horizon", 1, "--bootstrap-reps", 60, "--threads", 1)
    assert code == 0
    tau, center, lower, upper = read_band_csv(out / "simultaneous_h1_a0p2.csv")
    assert tau.size == 21
    assert np.all(lower <= center)
    assert np.all(center <= upper)
    # the mean predictor ignores the serial dependence, so its conditional
    # errors are biased and an equal-tailed interval may sit off the center
    tau, center, lower, upper = read_band_csv(out / "pointwise_h1_a0p2.csv")
    assert np.all(lower <= upper)
    meta = json.loads((out / "simultaneous_h1_a0p2.csv.json").read_text())
    assert meta["alpha"] == 0.2
    assert meta["q_star"] > 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["h1"]["B"] == 60
    with open(out / "ensemble_h1.csv") as fh:
        assert sum(1 for _ in csv.reader(fh)) == 1 + 60 + 1


def test_forecast_thread_count_does_not_change_output(series_csv, tmp_path):
    outs = []
    for threads in (1, 8):
        out = tmp_path / f"t{threads}"
        assert run_cli("forecast", "--input", series_csv, "--output", out, "--bootstrap-reps", 150,
                       "--threads", threads, "--seed", 4) == 0
        outs.append(out)
    for name in ("ensemble_h1.csv", "simultaneous_h1_a0p2.csv", "pointwise_h1_a0p05.csv", "summary.json"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


def test_forecast_interval_restricts_rows(series_csv, tmp_path):
    out = tmp_path / "fc"
    assert run_cli("forecast", "--input", series_csv, "--output", out, "--predictor", "mean",
                   "--bootstrap-reps", 40, "--interval", 0.25, 0.75, "--alpha", 0.2) == 0
    tau, *_ = read_band_csv(out / "simultaneous_h1_a0p2.csv")
    np.testing.assert_allclose(tau, np.linspace(0.25, 0.75, 11))
    meta = json.loads((out / "simultaneous_h1_a0p2.csv.json").read_text())
    assert meta["interval"] == [0.25, 0.75]


def test_forecast_config_echo_round_trip(series_csv, tmp_path):
    first, second = tmp_path / "first", tmp_path / "second"
    assert run_cli("forecast", "--input", series_csv, "--output", first, "--bootstrap-reps", 50,
                   "--seed", 11, "--k", 2, "--alpha", 0.1, "--horizon", 2, "--threads", 2) == 0
    assert run_cli("forecast", "--config", first / "config.json", "--output", second) == 0
    for path in sorted(first.iterdir()):
        if path.name != "config.json":
            assert path.read_bytes() == (second / path.name).read_bytes(), path.name
    echo1 = json.loads((first / "config.json").read_text())
    echo2 = json.loads((second / "config.json").read_text())
    assert echo1.pop("output") != echo2.pop("output")
    assert echo1 == echo2


def test_forecast_malformed_csv_names_row_and_column(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("tau,0,0.5,1\n1,0.1,0.2,0.3\n2,0.1,oops,0.3\n")
    assert run_cli("forecast", "--input", bad, "--output", tmp_path / "o") == 1
    err = capsys.readouterr().err
    assert "row 3, column 3" in err
    assert "[curves]" in err


def test_forecast_missing_input_file(tmp_path, capsys):
    assert run_cli("forecast", "--input", tmp_path / "nope.csv", "--output", tmp_path / "o") == 1
    assert "nope.csv" in capsys.readouterr().err


def test_study_single_replication_schema(tmp_path):
    out = tmp_path / "study.csv"
    code = run_cli("study", "--case", "II", "--n", 60, "--replications", 1, "--bootstrap-reps", 30,
                   "--threads", 1, "--quiet", "--output", out)
    assert code == 0
    rows = read_report(out)
    header = out.read_text().splitlines()[0].split(",")
    assert tuple(header[: len(REPORT_COLUMNS)]) == REPORT_COLUMNS
    assert [row["nominal"] for row in rows] == [0.8, 0.95]
    assert rows[0]["case"] == "II"
    echo = json.loads((tmp_path / "study.csv.json").read_text())
    assert echo["study"]["R"] == 1
    assert echo["study"]["dgp"]["b"] == 0.4


def test_study_config_echo_round_trip(tmp_path):
    first, second = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run_cli("study", "--case", "I", "--n", 50, "--replications", 2, "--bootstrap-reps", 25,
                   "--alpha", 0.2, "--seed", 5, "--quiet", "--output", first) == 0
    assert run_cli("study", "--config", f"{first}.json", "--quiet", "--threads", 2, "--output", second) == 0
    assert first.read_bytes() == second.read_bytes()


def test_evaluate_writes_horizon_rows(series_csv, tmp_path):
    out = tmp_path / "eval.csv"
    assert run_cli("evaluate", "--input", series_csv, "--output", out, "--predictor", "mean",
                   "--bootstrap-reps", 30, "--horizon", 1, "--horizon", 2, "--alpha", 0.2) == 0
    rows = read_report(out)
    assert [(row["horizon"], row["n_test"]) for row in rows] == [(1, 16), (2, 15)]


def test_config_echo_for_wrong_command_rejected(tmp_path, series_csv, capsys):
    sim_echo = f"{series_csv}.json"
    assert run_cli("forecast", "--config", sim_echo, "--input", series_csv, "--output", tmp_path / "o") == 1
    assert "simulate" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    out = tmp_path / "m.csv"
    proc = subprocess.run([sys.executable, "-m", "funcband", "simulate", "--n", "5", "--output", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert out.exists()
