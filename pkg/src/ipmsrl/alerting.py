"""SIEM alert generation and the static per-node alert store.

Alerts are immutable snapshots: the stage they carry never changes even
as the node's true infection advances. The store keeps only the most
recent alert per node; the full history lives in the episode trace.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

TRIGGER_INITIAL_ATTEMPT = "initial_infection_attempt"
TRIGGER_PROGRESSION = "stage_progression"
TRIGGER_LATERAL_SOURCE = "lateral_move_source"
TRIGGER_LATERAL_TARGET = "lateral_move_target"


@dataclass(frozen=True)
class Alert:
    node: str
    stage_at_alert: int
    timestep: int
    trigger: str


def alert_candidates(events: list[dict]) -> list[tuple[str, str]]:
    """(node, trigger) pairs eligible for alerting, in event order.

    Every lateral attempt targets a clean node, so each attempt is an
    initial-infection-attempt candidate on the target; a successful move
    additionally alerts on both source and target.
    """
    candidates = []
    for event in events:
        kind = event["kind"]
        if kind == "progression":
            candidates.append((event["node"], TRIGGER_PROGRESSION))
        elif kind == "lateral_attempt":
            candidates.append((event["target"], TRIGGER_INITIAL_ATTEMPT))
        elif kind == "lateral_success":
            candidates.append((event["source"], TRIGGER_LATERAL_SOURCE))
            candidates.append((event["target"], TRIGGER_LATERAL_TARGET))
    return candidates


def emit_alerts(
    candidates: list[tuple[str, str]],
    p_alert: float,
    enabled_triggers,
    stage_of,
    timestep: int,
    rng: random.Random,
) -> list[Alert]:
    """Filter candidates through the SIEM success probability.

    Each candidate rolls independently, in candidate order, so traces are
    seed-reproducible. ``stage_of`` maps node id to its current true stage.
    """
    alerts = []
    enabled = set(enabled_triggers)
    for node, trigger in candidates:
        if trigger not in enabled:
            continue
        if rng.random() < p_alert:
            alerts.append(Alert(node=node, stage_at_alert=stage_of(node), timestep=timestep, trigger=trigger))
    return alerts


def update_store(store: dict[str, Alert], alerts: list[Alert]) -> dict[str, Alert]:
    """Keep the most recent alert per node; later alerts supersede older ones."""
    for alert in alerts:
        store[alert.node] = alert
    return store
