"""Per-defender partially observable views and their numeric encoding.

Infection knowledge comes only from broadcast alerts and the agent's own
interactions; containment and operational status are physical plant state
and globally visible. The encoding layout is versioned and exposed in the
protocol handshake.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from .state import WorldState

LAYOUT_VERSION = "ipmsrl-obs/1"

UNKNOWN_STAGE = -1
UNKNOWN_AGE = -1


class NodeView(NamedTuple):
    last_known_stage: int  # -1 when never observed
    info_age: int  # steps since the information; -1 when never observed
    contained: bool
    operational: bool


@dataclass(frozen=True)
class DefenderView:
    agent_id: int
    t: int
    horizon: int
    nodes: dict[str, NodeView]
    own_busy: bool
    busy_remaining: int


def build_view(agent_id: int, world: WorldState) -> DefenderView:
    """One agent's belief: freshest of broadcast alerts and own interactions."""
    own = world.interactions.get(agent_id, {})
    nodes = {}
    for nid in world.node_ids:
        node = world.nodes[nid]
        alert = world.alert_store.get(nid)
        interaction = own.get(nid)
        known_t, known_stage = UNKNOWN_AGE, UNKNOWN_STAGE
        if alert is not None:
            known_t, known_stage = alert.timestep, alert.stage_at_alert
        if interaction is not None and interaction[0] >= known_t:
            known_t, known_stage = interaction
        if known_stage == UNKNOWN_STAGE:
            age = UNKNOWN_AGE
        else:
            age = world.t - known_t
        nodes[nid] = NodeView(known_stage, age, node.contained, node.operational)
    pending = world.pending.get(agent_id)
    busy = pending is not None and pending.resolves_at > world.t
    remaining = max(0, pending.resolves_at - world.t) if pending is not None else 0
    return DefenderView(
        agent_id=agent_id,
        t=world.t,
        horizon=world.config.horizon_T,
        nodes=nodes,
        own_busy=busy,
        busy_remaining=remaining,
    )


def encoded_length(num_nodes: int) -> int:
    return 5 * num_nodes + 3


def encode(view: DefenderView) -> list[float]:
    """Fixed-length vector, all coordinates in [0, 1].

    Per node, sorted by id: [stage_known, stage/12, age/T, contained,
    operational]; then [own_busy, busy_remaining/T, t/T]. Unknown nodes
    encode as stage_known=0 with age pinned to 1.
    """
    horizon = float(view.horizon)
    out = []
    for nid in sorted(view.nodes):
        nv = view.nodes[nid]
        if nv.last_known_stage == UNKNOWN_STAGE:
            out.extend([0.0, 0.0, 1.0])
        else:
            out.extend([1.0, nv.last_known_stage / 12.0, min(nv.info_age, view.horizon) / horizon])
        out.append(1.0 if nv.contained else 0.0)
        out.append(1.0 if nv.operational else 0.0)
    out.append(1.0 if view.own_busy else 0.0)
    out.append(min(view.busy_remaining, view.horizon) / horizon)
    out.append(min(view.t, view.horizon) / horizon)
    return out
