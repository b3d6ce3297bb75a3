"""Episode trace: newline-delimited JSON records and the replay reducer.

A trace is self-contained: header first, one record per event, footer
last. Replaying the records through the pure reducer reproduces the final
world state exactly, which is the integrity check behind `ipmsrl replay`.
"""

from __future__ import annotations

import json

TRACE_SCHEMA = "ipmsrl-trace/1"


def to_jsonl(records: list[dict]) -> str:
    return "\n".join(json.dumps(rec, sort_keys=True, separators=(",", ":")) for rec in records) + "\n"


def from_jsonl(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def header(records: list[dict]) -> dict:
    if not records or records[0].get("type") != "header":
        raise ValueError("trace has no header record")
    return records[0]


def footer(records: list[dict]) -> dict:
    if not records or records[-1].get("type") != "footer":
        raise ValueError("trace has no footer record (incomplete episode)")
    return records[-1]


class Replayer:
    """Pure reducer: folds trace records into a world-state summary."""

    def __init__(self, head: dict):
        self.nodes = {
            entry["id"]: {"stage": 0, "contained": False, "operational": True}
            for entry in head["nodes"]
            if entry["kind"] != "switch"
        }
        self.kinds = {entry["id"]: entry["kind"] for entry in head["nodes"]}
        self.pending: dict[str, dict] = {}
        self.t = 0
        self.outcome = None

    def apply(self, rec: dict) -> None:
        kind = rec["type"]
        if kind == "initial_compromise":
            self.nodes[rec["node"]]["stage"] = 1
        elif kind == "attack":
            self._apply_attack(rec)
        elif kind == "defense":
            self._apply_defense(rec)
        elif kind == "termination":
            self.t = rec["t"]
            self.outcome = rec["outcome"]
        elif kind in ("header", "footer", "alert", "illegal_action"):
            pass
        else:
            raise ValueError("unknown trace record type: %s" % kind)

    def _apply_attack(self, rec: dict) -> None:
        what = rec["kind"]
        if what == "progression":
            self.nodes[rec["node"]]["stage"] = rec["stage"]
        elif what == "lateral_success":
            self.nodes[rec["target"]]["stage"] = rec["target_stage"]
        elif what == "critical_infected":
            self.nodes[rec["node"]]["operational"] = False
        elif what == "lateral_attempt":
            pass
        else:
            raise ValueError("unknown attack event kind: %s" % what)

    def _apply_defense(self, rec: dict) -> None:
        agent = str(rec["agent"])
        if rec["phase"] == "initiate":
            if rec["delay"] > 0:
                self.pending[agent] = {
                    "action": rec["action"],
                    "target": rec["target"],
                    "initiated_at": rec["t"],
                    "resolves_at": rec["resolves_at"],
                }
            return
        self.pending.pop(agent, None)
        node = self.nodes[rec["target"]]
        node["stage"] = rec["stage"]
        node["contained"] = rec["contained"]
        node["operational"] = rec["operational"]

    def summary(self) -> dict:
        return {
            "t": self.t,
            "outcome": self.outcome,
            "nodes": {nid: dict(state) for nid, state in sorted(self.nodes.items())},
            "pending": {agent: dict(p) for agent, p in sorted(self.pending.items())},
        }


def replay(records: list[dict]) -> dict:
    """Fold a complete trace into the final world-state summary."""
    reducer = Replayer(header(records))
    for rec in records[1:]:
        if rec.get("type") == "footer":
            break
        reducer.apply(rec)
    return reducer.summary()


def iter_step_states(records: list[dict], num_steps: int):
    """Yield (t, node states) after each executed step, replayed from records.

    Steps with no recorded events still advance (and still count for
    per-step reward conditions).
    """
    reducer = Replayer(header(records))
    body = [rec for rec in records[1:] if rec.get("type") not in ("footer",)]
    idx = 0
    # records emitted at reset (initial compromise, reset-time alert) carry t=0
    # and precede the first step; they apply before the t=0 step end.
    for t in range(num_steps):
        while idx < len(body) and body[idx].get("t", t) <= t:
            reducer.apply(body[idx])
            idx += 1
        yield t, reducer.nodes
    while idx < len(body):
        reducer.apply(body[idx])
        idx += 1
