import csv
import io
import json
import math

import pytest

from config import ENV_OUTPUT_DIR
from qremlib.closedform import log_cosh
from qremlib.disorder import DisorderVariant, sample
from qremlib.pressure import classical_pressure
from services.qremlab import EXIT_CONFIG_ERROR, EXIT_ENGINE_ERROR, EXIT_OK, main

PRESSURE_ARGS = [
    "pressure",
    "--variant",
    "strict",
    "--p-list",
    "3",
    "--n-list",
    "6",
    "--beta-grid",
    "1.0",
    "--gamma-grid",
    "0,0.5",
    "--num-disorder",
    "4",
    "--base-seed",
    "10",
]


@pytest.fixture(autouse=True)
def isolated_cwd(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)


def read_csv(text: str) -> list[dict[str, str]]:
    return list(csv.DictReader(io.StringIO(text)))


def test_closed_form_to_stdout(capsys):
    assert main(["closed-form", "--beta-grid", "1", "--gamma-grid", "0.5,2", "--p-list", "10"]) == EXIT_OK
    rows = read_csv(capsys.readouterr().out)
    assert [row["branch"] for row in rows] == ["classical", "paramagnetic"]
    assert rows[0]["p"] == "10.0"
    assert float(rows[0]["one_over_p_term"]) == pytest.approx(0.125)
    paramagnetic = rows[1]
    assert float(paramagnetic["qrem_pressure"]) == pytest.approx(log_cosh(2.0))
    correction = float(paramagnetic["one_over_p_correction"]) - float(paramagnetic["qrem_pressure"])
    assert correction == pytest.approx(0.025933, abs=1e-6)
    assert float(paramagnetic["critical_field"]) == pytest.approx(math.acosh(math.exp(0.5)))


def test_pressure_is_reproducible(tmp_path):
    outputs = []
    for name, workers in (("first", "1"), ("second", "1"), ("parallel", "3")):
        path = tmp_path / f"{name}.csv"
        assert main(PRESSURE_ARGS + ["--workers", workers, "--output", str(path)]) == EXIT_OK
        outputs.append(path.read_text())
    assert outputs[0] == outputs[1] == outputs[2]
    rows = read_csv(outputs[0])
    assert [row["method"] for row in rows] == ["classical_exact", "dense_eig"]
    assert all(row["wall_time_s"] == "" for row in rows)


def test_zero_field_row_is_the_classical_pressure(capsys):
    assert main(PRESSURE_ARGS) == EXIT_OK
    row = read_csv(capsys.readouterr().out)[0]
    variant = DisorderVariant.strict(3)
    expected = math.fsum(classical_pressure(sample(variant, 6, seed), 1.0) for seed in range(10, 14)) / 4
    assert float(row["value"]) == pytest.approx(expected, rel=1e-14)
    assert float(row["trace_stderr"]) == 0.0


def test_quantum_row_dominates_classical(capsys):
    assert main(PRESSURE_ARGS) == EXIT_OK
    classical, quantum = read_csv(capsys.readouterr().out)
    assert float(quantum["value"]) >= float(classical["value"])


def test_timing_column(capsys):
    assert main(PRESSURE_ARGS + ["--timing"]) == EXIT_OK
    rows = read_csv(capsys.readouterr().out)
    assert all(float(row["wall_time_s"]) >= 0 for row in rows)


def test_json_output(capsys):
    assert main(PRESSURE_ARGS + ["--format", "json"]) == EXIT_OK
    records = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert len(records) == 2
    assert records[0]["variant"] == "strict:3"
    assert records[0]["wall_time_s"] is None
    assert records[1]["gamma"] == 0.5


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_OUTPUT_DIR, str(tmp_path / "results"))
    assert main(["closed-form", "--beta-grid", "2", "--gamma-grid", "1"]) == EXIT_OK
    rows = read_csv((tmp_path / "results" / "closed_form.csv").read_text())
    assert len(rows) == 1


def test_config_file_with_override(tmp_path, capsys):
    config = tmp_path / "sweep.cfg"
    config.write_text("VARIANT=rem\nN_LIST=6\nBETA_GRID=0.5,2\nGAMMA_GRID=0\nNUM_DISORDER=3\n")
    assert main(["pressure", "--config", str(config), "--beta-grid", "1"]) == EXIT_OK
    rows = read_csv(capsys.readouterr().out)
    assert [(row["variant"], row["beta"], row["p"]) for row in rows] == [("rem", "1.0", "")]


@pytest.mark.parametrize(
    "argv",
    [
        ["pressure", "--beta-grid", "0"],
        ["pressure", "--config", "missing.cfg"],
        ["selfavg", "--variant", "rem", "--n-list", "6", "--num-disorder", "50"],
        ["converge-p", "--variant", "strict", "--p-list", "2,3", "--n-list", "6"],
        ["cluster-census", "--variant", "rem", "--n-list", "6"],
    ],
)
def test_configuration_errors(argv):
    assert main(argv) == EXIT_CONFIG_ERROR


def test_cost_ceiling():
    assert main(PRESSURE_ARGS + ["--max-cost", "1"]) == EXIT_ENGINE_ERROR


def test_converge_p_with_rem_baseline(capsys):
    argv = ["converge-p", "--variant", "full", "--p-list", "2,3,4", "--n-list", "6"]
    argv += ["--beta-grid", "1", "--gamma-grid", "2", "--num-disorder", "2", "--include-rem"]
    assert main(argv) == EXIT_OK
    rows = read_csv(capsys.readouterr().out)
    assert [row["variant"] for row in rows] == ["full:2", "full:3", "full:4", "rem"]
    assert rows[-1]["gap_times_p"] == ""
    assert rows[-1]["one_over_p_correction"] == rows[-1]["qrem_pressure"]
    assert float(rows[0]["annealed_pressure"]) == pytest.approx(0.5)


def test_phase_diagram_branches(capsys):
    argv = ["phase-diagram", "--variant", "rem", "--n-list", "6", "--beta-grid", "1"]
    argv += ["--gamma-grid", "0.1,3", "--num-disorder", "3"]
    assert main(argv) == EXIT_OK
    low, high = read_csv(capsys.readouterr().out)
    assert (low["branch"], high["branch"]) == ("classical", "paramagnetic")
    assert (low["empirical_branch"], high["empirical_branch"]) == ("classical", "paramagnetic")
    assert low["classical_value"] == high["classical_value"]


@pytest.mark.slow
def test_selfavg_rows(capsys):
    argv = ["selfavg", "--variant", "rem", "--n-list", "6", "--beta-grid", "1", "--num-disorder", "200"]
    assert main(argv) == EXIT_OK
    rows = read_csv(capsys.readouterr().out)
    assert [row["t"] for row in rows] == ["1.0", "2.0", "3.0", "4.0"]
    assert all(row["num_disorder"] == "200" for row in rows)


@pytest.mark.slow
@pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
def test_selfavg_rem_within_concentration_bound(capsys, beta):
    argv = ["selfavg", "--variant", "rem", "--n-list", "12", "--beta-grid", str(beta)]
    argv += ["--num-disorder", "500", "--base-seed", "7"]
    assert main(argv) == EXIT_OK
    rows = read_csv(capsys.readouterr().out)
    assert len(rows) == 4
    assert all(row["within_bound"] == "true" for row in rows)
    assert all(float(row["exceedance"]) <= float(row["bound"]) + 4 * float(row["binomial_stderr"]) for row in rows)


def test_cluster_census_snapshot(capsys, snapshot):
    argv = ["cluster-census", "--variant", "rem", "--n-list", "8", "--epsilon", "100"]
    argv += ["--r", "0.5", "--L", "2", "--num-disorder", "3"]
    assert main(argv) == EXIT_OK
    snapshot.assert_match(capsys.readouterr().out, "census.csv")


def test_cluster_census_reports_inadmissible_schedule(capsys):
    argv = ["cluster-census", "--variant", "strict", "--p-list", "3", "--n-list", "8,10", "--epsilon", "0.5"]
    argv += ["--num-disorder", "3"]
    assert main(argv) == EXIT_OK
    rows = read_csv(capsys.readouterr().out)
    assert [(row["variant"], row["n"], row["seed"]) for row in rows] == [("strict:3", "8", ""), ("strict:3", "10", "")]
    assert all(row["norm_check"].startswith("skipped: inadmissible schedule: no integer L") for row in rows)
    assert all(row["L"] == "" and row["event_flag"] == "" for row in rows)


def test_cluster_census_mixes_sampled_and_unscheduled_rows(capsys):
    argv = ["cluster-census", "--variant", "full", "--p-list", "3,200", "--n-list", "8", "--epsilon", "2"]
    argv += ["--num-disorder", "2"]
    assert main(argv) == EXIT_OK
    rows = read_csv(capsys.readouterr().out)
    assert [(row["variant"], row["seed"]) for row in rows] == [("full:3", ""), ("full:200", "0"), ("full:200", "1")]
    assert rows[0]["norm_check"].startswith("skipped: inadmissible schedule")
    assert rows[1]["L"] == "5"


def test_cluster_census_cost_ceiling():
    argv = ["cluster-census", "--variant", "strict", "--p-list", "3", "--n-list", "20", "--epsilon", "0.01"]
    argv += ["--r", "0.3", "--L", "2", "--num-disorder", "2"]
    assert main(argv) == EXIT_ENGINE_ERROR


def test_cluster_census_small_ceiling():
    argv = ["cluster-census", "--variant", "rem", "--n-list", "8", "--epsilon", "100"]
    argv += ["--r", "0.5", "--L", "2", "--num-disorder", "3", "--max-cost", "1"]
    assert main(argv) == EXIT_ENGINE_ERROR
