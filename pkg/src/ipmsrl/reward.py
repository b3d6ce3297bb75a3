"""Composite reward: mission outcome, state penalties, action scores.

Global parts (mission + state) land at episode end; action-score
penalties are intrinsic and land at every step. Everything is pooled and
split equally across defenders. The functions here recompute each
component from a trace, independently of the engine's live accumulators,
so the two paths can be cross-checked.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import trace as trace_mod
from .kill_chain import SeverityBand, SeverityBands
from .scenario import RewardConfig
from .state import OUTCOME_DRAW, OUTCOME_LOSS, OUTCOME_WIN


@dataclass(frozen=True)
class RewardBreakdown:
    mission: float
    state_generic: float
    state_specific: float
    action_score_total: float
    total: float
    per_agent_share: float

    def to_dict(self) -> dict:
        return {
            "mission": self.mission,
            "state_generic": self.state_generic,
            "state_specific": self.state_specific,
            "action_score_total": self.action_score_total,
            "total": self.total,
            "per_agent_share": self.per_agent_share,
        }


def mission_reward(outcome: str) -> float:
    if outcome == OUTCOME_WIN:
        return 1.0
    if outcome == OUTCOME_DRAW:
        return 0.0
    if outcome == OUTCOME_LOSS:
        return -1.0
    raise ValueError("episode not terminated: outcome %r" % outcome)


def outcome_score(outcome: str) -> float:
    """Reporting statistic: win 1, draw 0.5, loss 0. Independent of weights."""
    return {OUTCOME_WIN: 1.0, OUTCOME_DRAW: 0.5, OUTCOME_LOSS: 0.0}[outcome]


def action_score(config: RewardConfig, action: str, band: SeverityBand) -> float:
    if action == "wait":
        return 0.0
    return config.action_score[action][band.value]


def state_specific_penalty(config: RewardConfig, infected_by_kind: dict[str, int]) -> float:
    """Penalty from distinct-infected counts per node kind, via thresholds."""
    total = 0.0
    for kind, count in infected_by_kind.items():
        table = config.state_specific.get(kind)
        if not table or count < 1:
            continue
        eligible = [thr for thr in table if thr <= count]
        if eligible:
            total += table[max(eligible)]
    return total


def compose(
    config: RewardConfig,
    num_defenders: int,
    mission: float,
    state_generic: float,
    state_specific: float,
    action_score_total: float,
) -> RewardBreakdown:
    total = (
        config.mission_weight * mission
        + config.state_weight * (0.5 * state_generic + 0.5 * state_specific)
        + config.action_weight * action_score_total
    )
    return RewardBreakdown(
        mission=mission,
        state_generic=state_generic,
        state_specific=state_specific,
        action_score_total=action_score_total,
        total=total,
        per_agent_share=total / num_defenders,
    )


# --- trace recomputation -------------------------------------------------

def state_generic_from_trace(records: list[dict], config: RewardConfig) -> float:
    """Walk the trace step by step and re-score the state-generic conditions:
    a contained-but-clean node-step, and a node left contained-and-clean
    unrecovered at episode end."""
    length = trace_mod.footer(records)["length"]
    total = 0.0
    final_nodes = None
    for _, nodes in trace_mod.iter_step_states(records, length):
        for state in nodes.values():
            if state["contained"] and state["stage"] == 0:
                total += config.contained_clean_per_step
        final_nodes = nodes
    if final_nodes is not None:
        for state in final_nodes.values():
            if state["contained"] and state["stage"] == 0:
                total += config.contained_clean_at_end
    return total


def state_specific_from_trace(records: list[dict], config: RewardConfig) -> float:
    head = trace_mod.header(records)
    kinds = {entry["id"]: entry["kind"] for entry in head["nodes"]}
    infected: set[str] = set()
    for rec in records:
        if rec.get("type") == "initial_compromise":
            infected.add(rec["node"])
        elif rec.get("type") == "attack" and rec["kind"] == "lateral_success":
            infected.add(rec["target"])
    by_kind: dict[str, int] = {}
    for nid in infected:
        by_kind[kinds[nid]] = by_kind.get(kinds[nid], 0) + 1
    return state_specific_penalty(config, by_kind)


def action_score_from_trace(records: list[dict], config: RewardConfig, bands: SeverityBands) -> float:
    total = 0.0
    for rec in records:
        if rec.get("type") == "defense" and rec["phase"] == "initiate":
            total += action_score(config, rec["action"], bands.band(rec["stage"]))
    return total


def breakdown_from_trace(
    records: list[dict],
    config: RewardConfig,
    bands: SeverityBands,
    num_defenders: int,
) -> RewardBreakdown:
    """Full independent recomputation of the episode's reward breakdown."""
    outcome = trace_mod.footer(records)["outcome"]
    return compose(
        config,
        num_defenders,
        mission=mission_reward(outcome),
        state_generic=state_generic_from_trace(records, config),
        state_specific=state_specific_from_trace(records, config),
        action_score_total=action_score_from_trace(records, config, bands),
    )
