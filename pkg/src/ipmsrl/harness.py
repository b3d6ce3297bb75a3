"""Batch experiment runner: sweeps, metric aggregation, reports.

Seeds are fully determined by the base seed, and RNG streams are
per-episode, so a run is reproducible byte-for-byte and parallel and
serial execution of the same spec produce identical reports.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from . import engine as engine_mod, trace as trace_mod
from .agents import make_policy
from .reward import outcome_score
from .scenario import ScenarioConfig, load_scenario_file, override_key
from .state import OUTCOME_DRAW, OUTCOME_LOSS, OUTCOME_WIN

CSV_COLUMNS = (
    "sweep_key",
    "sweep_value",
    "episodes",
    "wins",
    "draws",
    "losses",
    "outcome_mean",
    "outcome_ci90",
    "reward_mean",
    "reward_ci90",
    "length_mean",
    "length_ci90",
)

# Published-training reference points for the alert success probability
# sweep (outcome means after 1M-step MAPPO training). Documentation only:
# NOT an acceptance target for the scripted baselines shipped here.
REFERENCE_ALERT_SWEEP_OUTCOME_MEANS = {
    0.0: 0.4963,
    0.1: 0.4927,
    0.25: 0.5463,
    0.5: 0.7913,
    0.75: 0.9772,
    0.9: 0.9962,
    1.0: 0.9995,
}


@dataclass(frozen=True)
class ExperimentSpec:
    scenario_path: str
    policy: str  # applied to every defender
    episodes: int
    base_seed: int
    sweep_key: str | None = None
    sweep_values: tuple = ()
    workers: int = 1
    out_dir: str | None = None
    save_traces: bool = False


@dataclass
class ConfigMetrics:
    sweep_value: object
    episodes: int
    wins: int
    draws: int
    losses: int
    outcome_mean: float
    outcome_ci90: float
    reward_mean: float
    reward_ci90: float
    length_mean: float
    length_ci90: float


@dataclass
class MetricsReport:
    sweep_key: str | None
    rows: list[ConfigMetrics] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in self.rows:
            writer.writerow(
                [
                    self.sweep_key or "",
                    "" if row.sweep_value is None else row.sweep_value,
                    row.episodes,
                    row.wins,
                    row.draws,
                    row.losses,
                    "%.6f" % row.outcome_mean,
                    "%.6f" % row.outcome_ci90,
                    "%.6f" % row.reward_mean,
                    "%.6f" % row.reward_ci90,
                    "%.6f" % row.length_mean,
                    "%.6f" % row.length_ci90,
                ]
            )
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "sweep_key": self.sweep_key,
            "rows": [vars(row) for row in self.rows],
        }


def _mean_ci90(values: list[float]) -> tuple[float, float]:
    """Mean and 90% confidence half-width under a normal approximation."""
    n = len(values)
    mean = sum(values) / n
    if n < 2:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, 1.6449 * math.sqrt(var / n)


def _run_one(args) -> tuple[float, float, int, str, list[dict]]:
    config, seed, episode_index, policy_name, keep_trace = args
    policies = {agent: make_policy(policy_name) for agent in range(config.num_defenders)}
    episode = engine_mod.run_episode(config, seed, policies, episode_index=episode_index)
    outcome = episode.world.outcome
    total = episode.breakdown.total
    length = episode.world.t
    return (
        outcome_score(outcome),
        total,
        length,
        outcome,
        episode.records if keep_trace else [],
    )


def _aggregate(sweep_value, results) -> ConfigMetrics:
    outcomes = [r[0] for r in results]
    rewards = [r[1] for r in results]
    lengths = [float(r[2]) for r in results]
    labels = [r[3] for r in results]
    outcome_mean, outcome_ci = _mean_ci90(outcomes)
    reward_mean, reward_ci = _mean_ci90(rewards)
    length_mean, length_ci = _mean_ci90(lengths)
    return ConfigMetrics(
        sweep_value=sweep_value,
        episodes=len(results),
        wins=labels.count(OUTCOME_WIN),
        draws=labels.count(OUTCOME_DRAW),
        losses=labels.count(OUTCOME_LOSS),
        outcome_mean=outcome_mean,
        outcome_ci90=outcome_ci,
        reward_mean=reward_mean,
        reward_ci90=reward_ci,
        length_mean=length_mean,
        length_ci90=length_ci,
    )


def run_config(
    config: ScenarioConfig,
    policy: str,
    episodes: int,
    base_seed: int,
    workers: int = 1,
    keep_traces: bool = False,
):
    """Run one configuration; returns (results, traces)."""
    jobs = [(config, base_seed + i, i, policy, keep_traces) for i in range(episodes)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs, chunksize=max(1, episodes // (workers * 4))))
    else:
        results = [_run_one(job) for job in jobs]
    traces = [r[4] for r in results] if keep_traces else []
    return results, traces


def run_experiment(spec: ExperimentSpec) -> MetricsReport:
    config = load_scenario_file(spec.scenario_path)
    report = MetricsReport(sweep_key=spec.sweep_key)
    all_traces: list[tuple[object, int, list[dict]]] = []
    values = list(spec.sweep_values) if spec.sweep_key else [None]
    for value in values:
        cfg = override_key(config, spec.sweep_key, value) if spec.sweep_key else config
        results, traces = run_config(
            cfg, spec.policy, spec.episodes, spec.base_seed, spec.workers, spec.save_traces
        )
        report.rows.append(_aggregate(value, results))
        for i, records in enumerate(traces):
            all_traces.append((value, i, records))
    if spec.out_dir:
        os.makedirs(spec.out_dir, exist_ok=True)
        with open(os.path.join(spec.out_dir, "report.csv"), "w", encoding="utf-8") as fh:
            fh.write(report.to_csv())
        with open(os.path.join(spec.out_dir, "report.json"), "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        for value, i, records in all_traces:
            tag = "" if value is None else "%s_" % value
            path = os.path.join(spec.out_dir, "trace_%s%06d.jsonl" % (tag, i))
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(trace_mod.to_jsonl(records))
    return report


def summarize(traces: list[list[dict]], sweep_values=None, sweep_key=None) -> MetricsReport:
    """Recompute metrics from traces alone, independent of in-run counters.

    Invalid (footerless) traces are excluded; the count of exclusions is
    carried on the report row as a negative-free warning via `episodes`.
    """
    results = []
    excluded = 0
    for records in traces:
        try:
            foot = trace_mod.footer(records)
        except ValueError:
            excluded += 1
            continue
        results.append(
            (outcome_score(foot["outcome"]), foot["reward"]["total"], foot["length"], foot["outcome"], [])
        )
    report = MetricsReport(sweep_key=sweep_key)
    if results:
        report.rows.append(_aggregate(None, results))
    report.excluded = excluded  # type: ignore[attr-defined]
    return report
