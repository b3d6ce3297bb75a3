"""Ground-truth world state owned by a single episode."""

from __future__ import annotations

from dataclasses import dataclass, field

from .alerting import Alert
from .defense import PendingAction
from .scenario import NodeKind, ScenarioConfig

OUTCOME_WIN = "win"
OUTCOME_DRAW = "draw"
OUTCOME_LOSS = "loss"


@dataclass
class NodeState:
    node_id: str
    kind: NodeKind
    stage: int = 0
    contained: bool = False
    operational: bool = True

    @property
    def infected(self) -> bool:
        return self.stage > 0


@dataclass
class WorldState:
    config: ScenarioConfig
    t: int = 0
    nodes: dict[str, NodeState] = field(default_factory=dict)
    pending: dict[int, PendingAction] = field(default_factory=dict)
    alert_store: dict[str, Alert] = field(default_factory=dict)
    # per agent: node id -> (timestep, observed stage); the investigate-by-
    # interaction channel, never shared between agents
    interactions: dict[int, dict[str, tuple[int, int]]] = field(default_factory=dict)
    terminal: bool = False
    outcome: str | None = None

    @property
    def node_ids(self) -> list[str]:
        return sorted(self.nodes)

    def busy(self, agent_id: int) -> bool:
        pending = self.pending.get(agent_id)
        return pending is not None and pending.resolves_at > self.t

    def any_infected(self) -> bool:
        return any(node.stage > 0 for node in self.nodes.values())

    def any_contained(self) -> bool:
        return any(node.contained for node in self.nodes.values())

    def any_critical_infected(self) -> bool:
        return any(node.kind.is_critical and node.stage > 0 for node in self.nodes.values())

    def summary(self) -> dict:
        """Comparable snapshot used by trace-replay verification."""
        return {
            "t": self.t,
            "outcome": self.outcome,
            "nodes": {
                nid: {
                    "stage": node.stage,
                    "contained": node.contained,
                    "operational": node.operational,
                }
                for nid, node in sorted(self.nodes.items())
            },
            "pending": {
                str(agent): {
                    "action": pending.action.value,
                    "target": pending.target,
                    "initiated_at": pending.initiated_at,
                    "resolves_at": pending.resolves_at,
                }
                for agent, pending in sorted(self.pending.items())
            },
        }
