"""Baseline defenders: random, scripted incident-response, tabular learner.

The scripted policy follows the contain -> eradicate -> recover ordering;
the tabular learner is a one-step temporal-difference agent over a
coarsened view key, kept dependency-free for self-contained demos.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field

from . import engine as engine_mod
from .defense import Action, ActionKind, WAIT
from .kill_chain import SeverityBands
from .observation import UNKNOWN_STAGE, DefenderView
from .reward import outcome_score
from .scenario import ScenarioConfig

TABLE_SCHEMA = "ipmsrl-qtable/1"


class WaitPolicy:
    """Does nothing, forever. Useful as a do-nothing baseline in tests."""

    def __call__(self, agent_id, view, legal, rng) -> Action:
        return WAIT


class RandomPolicy:
    """Uniform over the legal (action, target) pairs."""

    def __call__(self, agent_id, view, legal, rng: random.Random) -> Action:
        kind, target = legal[rng.randrange(len(legal))]
        return Action(kind, target)


class HeuristicPolicy:
    """Contain the worst known infection, then eradicate, then recover.

    Pure function of the agent's own view: priority is (1) contain the
    uncontained node with the highest known stage, (2) eradicate a
    contained node still believed infected, (3) recover a contained node
    believed clean, (4) wait. Ties break on fresher information, then
    lowest node id.
    """

    def __call__(self, agent_id, view: DefenderView, legal, rng) -> Action:
        if view.own_busy:
            return WAIT
        infected_uncontained = []
        infected_contained = []
        clean_contained = []
        for nid in sorted(view.nodes):
            nv = view.nodes[nid]
            if nv.last_known_stage >= 1 and not nv.contained:
                infected_uncontained.append((-nv.last_known_stage, nv.info_age, nid))
            elif nv.last_known_stage >= 1 and nv.contained:
                infected_contained.append((-nv.last_known_stage, nv.info_age, nid))
            elif nv.last_known_stage == 0 and nv.contained:
                clean_contained.append(nid)
        legal_set = set(legal)
        for bucket, kind in (
            (infected_uncontained, ActionKind.CONTAIN),
            (infected_contained, ActionKind.ERADICATE),
        ):
            for _, _, nid in sorted(bucket):
                if (kind, nid) in legal_set:
                    return Action(kind, nid)
        for nid in clean_contained:
            if (ActionKind.RECOVER, nid) in legal_set:
                return Action(ActionKind.RECOVER, nid)
        return WAIT


POLICY_NAMES = ("wait", "random", "heuristic")


def make_policy(name: str, table: "QTable | None" = None, epsilon: float = 0.0):
    if name == "wait":
        return WaitPolicy()
    if name == "random":
        return RandomPolicy()
    if name == "heuristic":
        return HeuristicPolicy()
    if name == "tabular_q":
        if table is None:
            raise ValueError("tabular_q policy needs a trained table")
        return TabularQPolicy(table, epsilon=epsilon)
    raise ValueError("unknown policy '%s'" % name)


# --- tabular learner ------------------------------------------------------


def view_key(view: DefenderView, bands: SeverityBands) -> str:
    """Coarsened state key: per-node (known severity band, contained) plus
    the agent's own busy flag."""
    parts = []
    for nid in sorted(view.nodes):
        nv = view.nodes[nid]
        if nv.last_known_stage == UNKNOWN_STAGE:
            band = "?"
        else:
            band = bands.band(nv.last_known_stage).value[0]
        parts.append(band + ("C" if nv.contained else "-"))
    parts.append("B" if view.own_busy else "-")
    return "".join(parts)


@dataclass
class QTable:
    actions: list[tuple[str, str | None]]  # (action kind, target) in fixed order
    values: dict[str, list[float]] = field(default_factory=dict)

    def row(self, key: str) -> list[float]:
        if key not in self.values:
            self.values[key] = [0.0] * len(self.actions)
        return self.values[key]

    def save(self, path) -> None:
        payload = {
            "schema": TABLE_SCHEMA,
            "actions": [[kind, target] for kind, target in self.actions],
            "values": self.values,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True)

    @classmethod
    def load(cls, path) -> "QTable":
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
        if payload.get("schema") != TABLE_SCHEMA:
            raise ValueError("not a %s file" % TABLE_SCHEMA)
        return cls(
            actions=[(kind, target) for kind, target in payload["actions"]],
            values=payload["values"],
        )


def td_update(
    table: QTable,
    key: str,
    action_index: int,
    reward: float,
    next_key: str,
    terminal: bool,
    lr: float,
    gamma: float,
) -> None:
    """One-step temporal-difference update."""
    row = table.row(key)
    bootstrap = 0.0 if terminal else max(table.row(next_key))
    row[action_index] += lr * (reward + gamma * bootstrap - row[action_index])


class TabularQPolicy:
    """Epsilon-greedy over a (possibly still training) value table."""

    def __init__(self, table: QTable, epsilon: float = 0.0):
        self.table = table
        self.epsilon = epsilon
        self.action_index = {pair: i for i, pair in enumerate(table.actions)}

    def __call__(self, agent_id, view: DefenderView, legal, rng: random.Random) -> Action:
        legal_pairs = [(kind.value, target) for kind, target in legal]
        if self.epsilon > 0 and rng.random() < self.epsilon:
            kind, target = legal_pairs[rng.randrange(len(legal_pairs))]
        else:
            bands = SeverityBands()
            row = self.table.row(view_key(view, bands))
            kind, target = max(legal_pairs, key=lambda pair: (row[self.action_index[pair]], pair[0], pair[1] or ""))
        return Action(ActionKind(kind), target)


def action_table(config: ScenarioConfig) -> list[tuple[str, str | None]]:
    """Fixed global action ordering shared by the learner and the protocol."""
    episode = engine_mod.Episode(config, seed=0)
    return [(kind.value, target) for kind, target in episode.legal_pairs(0)]


def train_tabular_q(
    config: ScenarioConfig,
    episodes: int,
    seed: int,
    lr: float = 0.1,
    gamma: float = 0.95,
    epsilon: float = 0.15,
) -> QTable:
    """Train independent per-agent tables with a shared episode stream and
    return agent 0's table (all agents share one table when num_defenders
    is 1, the intended setting for the micro topology)."""
    bands = config.severity_bands
    table = QTable(actions=action_table(config))
    policy = TabularQPolicy(table, epsilon=epsilon)
    for episode_index in range(episodes):
        episode = engine_mod.Episode(config, seed, episode_index=episode_index)
        views = episode.views()
        keys = {agent: view_key(views[agent], bands) for agent in views}
        while not episode.world.terminal:
            chosen = {}
            joint = {}
            for agent in range(config.num_defenders):
                action = policy(agent, views[agent], episode.legal_pairs(agent), episode.policy_rng)
                joint[agent] = action
                chosen[agent] = policy.action_index[(action.kind.value, action.target)]
            result = episode.step(joint)
            views = result.views
            for agent in range(config.num_defenders):
                next_key = view_key(views[agent], bands)
                td_update(
                    table,
                    keys[agent],
                    chosen[agent],
                    result.rewards[agent],
                    next_key,
                    result.terminal,
                    lr,
                    gamma,
                )
                keys[agent] = next_key
    return table


def evaluate_policy(config: ScenarioConfig, policy_factory, episodes: int, seed: int, episode_offset: int = 0) -> float:
    """Mean episode outcome (win 1 / draw 0.5 / loss 0) over fresh episodes."""
    total = 0.0
    for i in range(episodes):
        policies = {agent: policy_factory() for agent in range(config.num_defenders)}
        episode = engine_mod.run_episode(config, seed, policies, episode_index=episode_offset + i)
        total += outcome_score(episode.world.outcome)
    return total / episodes
