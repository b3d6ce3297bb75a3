"""Episode lifecycle: reset, the per-timestep loop, termination, tracing.

Canonical phase order within a step: defender resolutions, defender
initiations, win check, attacker, loss check, alert emission, timestep
increment (draw check), view rebuild and reward delivery. The win check
runs before the attacker so a fully cleaned network cannot be lost in the
step it was cleaned; loss latches the instant a critical node is
infected.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

from . import alerting, attacker as attacker_mod, reward as reward_mod, trace as trace_mod
from .defense import Action, ActionKind, PendingAction, apply_effect, legal_action_kinds
from .observation import LAYOUT_VERSION, DefenderView, build_view
from .scenario import ScenarioConfig, config_hash, distance_to_critical, effective_adjacency
from .state import NodeState, OUTCOME_DRAW, OUTCOME_LOSS, OUTCOME_WIN, WorldState


def derive_rng(seed: int, episode_index: int, name: str) -> random.Random:
    """Named, independent RNG stream: sha256(seed, episode, name) -> seed."""
    digest = hashlib.sha256(f"ipmsrl:{seed}:{episode_index}:{name}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


@dataclass
class StepResult:
    t: int
    views: dict[int, DefenderView]
    rewards: dict[int, float]
    illegal: dict[int, bool]
    terminal: bool
    outcome: str | None


class Episode:
    """Single-owner episode runner; distinct episodes may run in parallel."""

    def __init__(self, config: ScenarioConfig, seed: int, episode_index: int = 0):
        self.config = config
        self.seed = seed
        self.episode_index = episode_index
        self.adjacency = effective_adjacency(config.topology)
        self.distances = distance_to_critical(config.topology)
        self.attacker_rng = derive_rng(seed, episode_index, "attacker")
        self.alert_rng = derive_rng(seed, episode_index, "alerts")
        self.policy_rng = derive_rng(seed, episode_index, "policy")

        self.world = WorldState(config=config)
        for nid, kind in sorted(config.topology.nodes):
            if not kind.is_switch:
                self.world.nodes[nid] = NodeState(node_id=nid, kind=kind)
        for agent in range(config.num_defenders):
            self.world.interactions[agent] = {}

        self.records: list[dict] = [
            {
                "type": "header",
                "schema": trace_mod.TRACE_SCHEMA,
                "scenario_hash": config_hash(config),
                "seed": seed,
                "episode_index": episode_index,
                "layout": LAYOUT_VERSION,
                "agents": config.num_defenders,
                "nodes": [
                    {"id": nid, "kind": kind.value} for nid, kind in sorted(config.topology.nodes)
                ],
            }
        ]

        # live reward accumulators (the trace walker recomputes these
        # independently; test suites cross-check the two paths)
        self._action_score_total = 0.0
        self._contained_clean_steps = 0
        self._infected_by_kind: dict[str, int] = {}
        self._infected_nodes: set[str] = set()
        self.breakdown: reward_mod.RewardBreakdown | None = None

        # initial compromise at t=0
        entry = attacker_mod.initial_compromise(config, config.topology, self.attacker_rng)
        self.world.nodes[entry].stage = 1
        self._mark_infected(entry)
        self.records.append({"type": "initial_compromise", "t": 0, "node": entry})
        self._emit_alerts([(entry, alerting.TRIGGER_INITIAL_ATTEMPT)])

    # -- helpers ----------------------------------------------------------

    def _mark_infected(self, nid: str) -> None:
        if nid not in self._infected_nodes:
            self._infected_nodes.add(nid)
            kind = self.world.nodes[nid].kind.value
            self._infected_by_kind[kind] = self._infected_by_kind.get(kind, 0) + 1

    def _emit_alerts(self, candidates: list[tuple[str, str]]) -> None:
        alerts = alerting.emit_alerts(
            candidates,
            self.config.alert_success_prob,
            self.config.alert_triggers,
            lambda nid: self.world.nodes[nid].stage,
            self.world.t,
            self.alert_rng,
        )
        alerting.update_store(self.world.alert_store, alerts)
        for alert in alerts:
            self.records.append(
                {
                    "type": "alert",
                    "t": alert.timestep,
                    "node": alert.node,
                    "stage": alert.stage_at_alert,
                    "trigger": alert.trigger,
                }
            )

    def views(self) -> dict[int, DefenderView]:
        return {agent: build_view(agent, self.world) for agent in range(self.config.num_defenders)}

    def legal_pairs(self, agent: int) -> list[tuple[ActionKind, str | None]]:
        """All legal (action, target) pairs for the agent, in stable order."""
        if self.world.busy(agent):
            return [(ActionKind.WAIT, None)]
        pairs: list[tuple[ActionKind, str | None]] = [(ActionKind.WAIT, None)]
        for nid in self.world.node_ids:
            kinds = legal_action_kinds(self.world.nodes[nid].kind, busy=False)
            for kind in (ActionKind.CONTAIN, ActionKind.ERADICATE, ActionKind.RECOVER):
                if kind in kinds:
                    pairs.append((kind, nid))
        return pairs

    def _check_legal(self, agent: int, action: Action) -> str | None:
        """Reason the action is illegal, or None when it is fine."""
        if agent not in range(self.config.num_defenders):
            return "unknown agent"
        if action.kind is ActionKind.WAIT:
            return None
        if self.world.busy(agent):
            return "agent busy"
        if action.target is None:
            return "missing target"
        node = self.world.nodes.get(action.target)
        if node is None:
            return "unknown target"
        if action.kind not in legal_action_kinds(node.kind, busy=False):
            return "action not available on node kind"
        return None

    def _resolve(self, pending: PendingAction) -> None:
        node = self.world.nodes[pending.target]
        effect = apply_effect(node, pending.action)
        self.records.append(
            {
                "type": "defense",
                "phase": "resolve",
                "t": self.world.t,
                "agent": pending.agent_id,
                "action": pending.action.value,
                "target": pending.target,
                "effect": effect,
                "stage": node.stage,
                "contained": node.contained,
                "operational": node.operational,
            }
        )

    # -- main loop --------------------------------------------------------

    def step(self, joint_action: dict[int, Action]) -> StepResult:
        if self.world.terminal:
            raise RuntimeError("episode already terminated")
        world = self.world
        config = self.config
        t = world.t
        illegal = {agent: False for agent in range(config.num_defenders)}
        step_scores = 0.0

        # phase 1a: resolve due pending actions, ascending agent id
        for agent in sorted(world.pending):
            pending = world.pending[agent]
            if pending.resolves_at == t:
                del world.pending[agent]
                self._resolve(pending)

        # phase 1b: new initiations, ascending agent id
        for agent in range(config.num_defenders):
            action = joint_action.get(agent, Action(ActionKind.WAIT))
            why = self._check_legal(agent, action)
            if why is not None:
                illegal[agent] = True
                self.records.append(
                    {
                        "type": "illegal_action",
                        "t": t,
                        "agent": agent,
                        "action": action.kind.value,
                        "target": action.target,
                        "reason": why,
                    }
                )
                continue
            if action.kind is ActionKind.WAIT:
                continue
            node = world.nodes[action.target]
            # investigate-by-interaction: the acting agent learns the truth now
            world.interactions[agent][action.target] = (t, node.stage)
            band = config.severity_bands.band(node.stage)
            delay = config.delays.delay(action.kind.value, band)
            step_scores += reward_mod.action_score(config.rewards, action.kind.value, band)
            self.records.append(
                {
                    "type": "defense",
                    "phase": "initiate",
                    "t": t,
                    "agent": agent,
                    "action": action.kind.value,
                    "target": action.target,
                    "stage": node.stage,
                    "delay": delay,
                    "resolves_at": t + delay,
                }
            )
            pending = PendingAction(agent, action.kind, action.target, t, t + delay)
            if delay == 0:
                self._resolve(pending)
            else:
                world.pending[agent] = pending

        self._action_score_total += step_scores

        # phase 2: win check, before the attacker moves
        if not world.any_infected() and not world.any_contained() and t + 1 < config.horizon_T:
            world.terminal = True
            world.outcome = OUTCOME_WIN

        # phases 3-5: attacker, loss latch, alerts
        if not world.terminal:
            events = attacker_mod.attacker_step(world, config, self.adjacency, self.distances, self.attacker_rng)
            for event in events:
                self.records.append(event)
                if event["kind"] == "lateral_success":
                    self._mark_infected(event["target"])
            if world.any_critical_infected() and world.outcome is None:
                world.terminal = True
                world.outcome = OUTCOME_LOSS
            self._emit_alerts(alerting.alert_candidates(events))

        # phase 6: advance time; draw on horizon
        world.t = t + 1
        if not world.terminal and world.t >= config.horizon_T:
            world.terminal = True
            world.outcome = OUTCOME_DRAW

        # per-step state-generic accrual, evaluated on the end-of-step state
        for node in world.nodes.values():
            if node.contained and node.stage == 0:
                self._contained_clean_steps += 1

        if world.terminal:
            self.records.append({"type": "termination", "t": world.t, "outcome": world.outcome})

        # phase 7: rewards and views
        rewards = self._deliver_rewards(step_scores)
        views = self.views()
        return StepResult(
            t=world.t,
            views=views,
            rewards=rewards,
            illegal=illegal,
            terminal=world.terminal,
            outcome=world.outcome,
        )

    def _deliver_rewards(self, step_scores: float) -> dict[int, float]:
        config = self.config
        n = config.num_defenders
        share = config.rewards.action_weight * step_scores / n
        if self.world.terminal:
            state_generic = self._contained_clean_steps * config.rewards.contained_clean_per_step
            state_generic += sum(
                config.rewards.contained_clean_at_end
                for node in self.world.nodes.values()
                if node.contained and node.stage == 0
            )
            state_specific = reward_mod.state_specific_penalty(config.rewards, self._infected_by_kind)
            mission = reward_mod.mission_reward(self.world.outcome)
            self.breakdown = reward_mod.compose(
                config.rewards,
                n,
                mission=mission,
                state_generic=state_generic,
                state_specific=state_specific,
                action_score_total=self._action_score_total,
            )
            share += (
                config.rewards.mission_weight * mission
                + config.rewards.state_weight * 0.5 * (state_generic + state_specific)
            ) / n
            self.records.append(
                {
                    "type": "footer",
                    "outcome": self.world.outcome,
                    "length": self.world.t,
                    "reward": self.breakdown.to_dict(),
                }
            )
        return {agent: share for agent in range(n)}


def reset(config: ScenarioConfig, seed: int | None = None, episode_index: int = 0) -> Episode:
    """Fresh episode; initial views reflect only the reset-time alert roll."""
    return Episode(config, config.seed if seed is None else seed, episode_index)


def run_episode(config: ScenarioConfig, seed: int, policies, episode_index: int = 0) -> Episode:
    """Drive policies until termination; the result carries the full trace.

    ``policies`` maps agent id to a callable
    ``policy(agent_id, view, legal_pairs, rng) -> Action``.
    """
    episode = Episode(config, seed, episode_index)
    views = episode.views()
    while not episode.world.terminal:
        joint = {
            agent: policies[agent](agent, views[agent], episode.legal_pairs(agent), episode.policy_rng)
            for agent in range(config.num_defenders)
        }
        result = episode.step(joint)
        views = result.views
    return episode
