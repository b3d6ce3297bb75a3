"""Adversary dynamics: initial compromise, stage progression, lateral movement.

Each infected, uncontained node acts independently every timestep. The
lateral-movement capability is gated on the node's stage at the start of
the step, so a node that first reaches the gate this step moves from the
next step onward; once at or past the gate it can progress and move in
the same timestep.
"""

from __future__ import annotations

import random

from .kill_chain import MAX_STAGE
from .scenario import ScenarioConfig, TopologySpec
from .state import WorldState


def initial_compromise(config: ScenarioConfig, topology: TopologySpec, rng: random.Random) -> str:
    """Pick the episode's entry node: named, or uniform over eligible nodes."""
    if config.attacker.initial_node != "random":
        return config.attacker.initial_node
    eligible = topology.infectable_ids()
    if not eligible:
        raise ValueError("no non-critical infectable node available for initial compromise")
    return eligible[rng.randrange(len(eligible))]


def eligible_targets(source: str, world: WorldState, adjacency: dict[str, frozenset[str]]) -> list[str]:
    """Adjacent nodes the attacker could move to: uncontained and still clean."""
    out = []
    for nid in sorted(adjacency[source]):
        node = world.nodes[nid]
        if node.contained or node.stage > 0:
            continue
        out.append(nid)
    return out


def choose_lateral_target(
    source: str,
    theta: float,
    world: WorldState,
    adjacency: dict[str, frozenset[str]],
    distances: dict[str, int],
    rng: random.Random,
) -> str | None:
    """Targeted-vs-viral target choice.

    With probability theta pick among the adjacent eligible nodes closest
    to a critical node (uniform tie-break); otherwise pick uniformly over
    all eligible neighbours. Returns None when nothing is eligible.
    """
    candidates = eligible_targets(source, world, adjacency)
    if not candidates:
        return None
    if rng.random() < theta:
        best = min(distances[nid] for nid in candidates)
        candidates = [nid for nid in candidates if distances[nid] == best]
    return candidates[rng.randrange(len(candidates))]


def attacker_step(
    world: WorldState,
    config: ScenarioConfig,
    adjacency: dict[str, frozenset[str]],
    distances: dict[str, int],
    rng: random.Random,
) -> list[dict]:
    """Advance the adversary one timestep and return the attack events.

    Nodes are processed in ascending node-id order over a snapshot of the
    infected set, so the event list (and RNG consumption) is a pure
    function of world state and seed.
    """
    attacker = config.attacker
    events: list[dict] = []
    snapshot = [
        (nid, world.nodes[nid].stage)
        for nid in world.node_ids
        if world.nodes[nid].stage > 0
        and not world.nodes[nid].contained
        and not world.nodes[nid].kind.is_critical
    ]
    for nid, start_stage in snapshot:
        node = world.nodes[nid]
        progressed = False
        if 1 <= node.stage <= MAX_STAGE - 1 and rng.random() < attacker.p_progress:
            node.stage += 1
            progressed = True
            events.append({"type": "attack", "kind": "progression", "t": world.t, "node": nid, "stage": node.stage})
        if attacker.exclusive_action and progressed:
            continue
        if start_stage < config.lateral_gate_stage:
            continue
        target = choose_lateral_target(nid, attacker.targeting_theta, world, adjacency, distances, rng)
        if target is None:
            continue
        events.append({"type": "attack", "kind": "lateral_attempt", "t": world.t, "source": nid, "target": target})
        if rng.random() < attacker.p_lateral_success:
            target_node = world.nodes[target]
            target_node.stage = 1
            events.append(
                {
                    "type": "attack",
                    "kind": "lateral_success",
                    "t": world.t,
                    "source": nid,
                    "target": target,
                    "target_stage": 1,
                }
            )
            if target_node.kind.is_critical:
                target_node.operational = False
                events.append({"type": "attack", "kind": "critical_infected", "t": world.t, "node": target})
                if not world.terminal:
                    world.terminal = True
                    world.outcome = "loss"
    return events
