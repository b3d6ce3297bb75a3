"""Defender actions: legality, severity-dependent delays, effect resolution.

Contain blocks outbound infection (and freezes progression by default) at
the cost of taking the node out of service. Eradicate cleans the stage.
Recover only succeeds on a clean node: eradication must come first.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .scenario import NodeKind


class ActionKind(str, Enum):
    CONTAIN = "contain"
    ERADICATE = "eradicate"
    RECOVER = "recover"
    WAIT = "wait"


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    target: str | None = None


WAIT = Action(ActionKind.WAIT)


@dataclass
class PendingAction:
    agent_id: int
    action: ActionKind
    target: str
    initiated_at: int
    resolves_at: int


def legal_action_kinds(kind: NodeKind, busy: bool) -> set[ActionKind]:
    """Action kinds an agent may aim at a node of the given kind."""
    if busy:
        return {ActionKind.WAIT}
    if kind.is_switch:
        return {ActionKind.WAIT}
    if kind.is_critical:
        return {ActionKind.RECOVER, ActionKind.WAIT}
    return {ActionKind.CONTAIN, ActionKind.ERADICATE, ActionKind.RECOVER, ActionKind.WAIT}


def apply_effect(node, action: ActionKind) -> str:
    """Apply a resolved action to the node's current state.

    Returns the effect label recorded in the trace. Recover on a still
    infected node is a recorded failure, not an error.
    """
    if action is ActionKind.CONTAIN:
        node.contained = True
        node.operational = False
        return "contained"
    if action is ActionKind.ERADICATE:
        node.stage = 0
        return "eradicated"
    if action is ActionKind.RECOVER:
        if node.stage == 0:
            node.contained = False
            node.operational = True
            return "recovered"
        return "recover_failed"
    raise ValueError("wait actions never resolve")
