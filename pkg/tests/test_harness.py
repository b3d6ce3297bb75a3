import csv
import io
import json
import statistics

import pytest

from ipmsrl import harness
from ipmsrl.scenario import load_micro_scenario, micro_scenario_text


@pytest.fixture
def micro_path(tmp_path):
    path = tmp_path / "micro.json"
    path.write_text(micro_scenario_text())
    return str(path)


def test_mean_ci90_against_statistics_module():
    values = [1.0, 0.5, 0.0, 1.0, 0.5, 1.0, 0.0, 0.5]
    mean, ci = harness._mean_ci90(values)
    assert mean == pytest.approx(statistics.fmean(values))
    sem = statistics.stdev(values) / len(values) ** 0.5
    assert ci == pytest.approx(1.6449 * sem, rel=1e-9)
    assert harness._mean_ci90([0.7]) == (0.7, 0.0)


def test_run_config_serial_equals_parallel():
    config = load_micro_scenario()
    serial, _ = harness.run_config(config, "random", episodes=24, base_seed=3, workers=1)
    parallel, _ = harness.run_config(config, "random", episodes=24, base_seed=3, workers=4)
    assert serial == parallel


def test_run_experiment_writes_reports(micro_path, tmp_path):
    out = tmp_path / "out"
    spec = harness.ExperimentSpec(
        scenario_path=micro_path,
        policy="heuristic",
        episodes=10,
        base_seed=0,
        out_dir=str(out),
        save_traces=True,
    )
    report = harness.run_experiment(spec)
    assert len(report.rows) == 1
    row = report.rows[0]
    assert row.episodes == 10
    assert row.wins + row.draws + row.losses == 10
    assert (out / "report.csv").exists()
    assert (out / "report.json").exists()
    traces = sorted(out.glob("trace_*.jsonl"))
    assert len(traces) == 10
    parsed = json.loads((out / "report.json").read_text())
    assert parsed["rows"][0]["episodes"] == 10


def test_sweep_rows_and_csv_shape(micro_path):
    spec = harness.ExperimentSpec(
        scenario_path=micro_path,
        policy="wait",
        episodes=5,
        base_seed=1,
        sweep_key="alert_success_prob",
        sweep_values=(0.0, 1.0),
    )
    report = harness.run_experiment(spec)
    assert [row.sweep_value for row in report.rows] == [0.0, 1.0]
    rows = list(csv.reader(io.StringIO(report.to_csv())))
    assert rows[0] == list(harness.CSV_COLUMNS)
    assert len(rows) == 3
    assert rows[1][0] == "alert_success_prob"


def test_summarize_recomputes_from_traces(micro_path):
    config = load_micro_scenario()
    results, traces = harness.run_config(config, "random", episodes=15, base_seed=9, keep_traces=True)
    direct = harness._aggregate(None, results)
    report = harness.summarize(traces)
    row = report.rows[0]
    assert row.outcome_mean == pytest.approx(direct.outcome_mean)
    assert row.reward_mean == pytest.approx(direct.reward_mean)
    assert row.length_mean == pytest.approx(direct.length_mean)
    assert report.excluded == 0
    # a truncated trace is excluded, not crashed on
    report = harness.summarize(traces[:3] + [traces[3][:-1]])
    assert report.excluded == 1
    assert report.rows[0].episodes == 3


def test_reference_sweep_constants():
    # published reference points shipped for documentation; spot-check a few
    ref = harness.REFERENCE_ALERT_SWEEP_OUTCOME_MEANS
    assert ref[0.75] == 0.9772
    assert ref[0.9] == 0.9962
    assert all(0.0 <= v <= 1.0 for v in ref.values())
