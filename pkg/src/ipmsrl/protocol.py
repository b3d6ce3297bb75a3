"""Language-neutral step service: newline-delimited JSON over stdio or TCP.

Session state machine: hello -> (reset -> (act)* -> episode end)*. Every
request gets exactly one response; message ids must increase within a
session. Malformed input yields an error response and the session keeps
going; an order violation resets the session to its post-hello state.
"""

from __future__ import annotations

import json
import selectors
import socket
import sys

from . import engine as engine_mod
from .defense import Action, ActionKind, legal_action_kinds
from .observation import LAYOUT_VERSION, encode, encoded_length
from .scenario import ScenarioConfig, config_hash
from .trace import to_jsonl

PROTOCOL_VERSION = "ipmsrl-proto/1"
DEFAULT_IDLE_TIMEOUT = 300.0


def action_table(config: ScenarioConfig) -> list[dict]:
    """Integer-id action space: wait first, then kind x node in stable order."""
    actions = [{"kind": "wait", "target": None}]
    node_ids = sorted(
        nid for nid, kind in config.topology.nodes if not kind.is_switch
    )
    for nid in node_ids:
        kinds = dict(config.topology.nodes)[nid]
        for kind in (ActionKind.CONTAIN, ActionKind.ERADICATE, ActionKind.RECOVER):
            if kind in legal_action_kinds(kinds, busy=False):
                actions.append({"kind": kind.value, "target": nid})
    return actions


class Session:
    """One client's session; transport-agnostic (lines in, lines out)."""

    def __init__(self, config: ScenarioConfig):
        self.config = config
        self.actions = action_table(config)
        self.greeted = False
        self.episode: engine_mod.Episode | None = None
        self.episode_counter = 0
        self.include_trace = False
        self.last_id: int | None = None
        self.closed = False

    # -- message handling ---------------------------------------------------

    def handle_line(self, line: str) -> str:
        try:
            msg = json.loads(line)
        except json.JSONDecodeError:
            return self._encode({"type": "error", "id": None, "code": "parse_error", "message": "not valid JSON"})
        if not isinstance(msg, dict) or "type" not in msg:
            return self._encode({"type": "error", "id": None, "code": "parse_error", "message": "expected an object with a 'type' field"})
        msg_id = msg.get("id")
        if not isinstance(msg_id, int):
            return self._error(None, "bad_id", "message id must be an integer")
        if self.last_id is not None and msg_id <= self.last_id:
            return self._error(msg_id, "bad_id", "message ids must be monotonically increasing")
        self.last_id = msg_id

        handler = {
            "hello": self._handle_hello,
            "reset": self._handle_reset,
            "act": self._handle_act,
        }.get(msg["type"])
        if handler is None:
            return self._error(msg_id, "bad_type", "unknown message type '%s'" % msg["type"])
        return handler(msg)

    def _encode(self, payload: dict) -> str:
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    def _error(self, msg_id, code: str, message: str) -> str:
        return self._encode({"type": "error", "id": msg_id, "code": code, "message": message})

    def _order_violation(self, msg_id, message: str) -> str:
        # protocol-order violation: drop back to the post-hello state
        self.episode = None
        return self._error(msg_id, "protocol_order", message)

    def _handle_hello(self, msg: dict) -> str:
        if msg.get("protocol") not in (None, PROTOCOL_VERSION):
            return self._error(msg["id"], "version_mismatch", "server speaks %s" % PROTOCOL_VERSION)
        self.greeted = True
        self.episode = None
        num_nodes = len([1 for _, kind in self.config.topology.nodes if not kind.is_switch])
        return self._encode(
            {
                "type": "hello",
                "id": msg["id"],
                "protocol": PROTOCOL_VERSION,
                "layout": LAYOUT_VERSION,
                "agents": list(range(self.config.num_defenders)),
                "obs_length": encoded_length(num_nodes),
                "actions": self.actions,
                "scenario_hash": config_hash(self.config),
                "horizon_T": self.config.horizon_T,
            }
        )

    def _handle_reset(self, msg: dict) -> str:
        if not self.greeted:
            return self._order_violation(msg["id"], "hello required before reset")
        seed = msg.get("seed", self.config.seed)
        if not isinstance(seed, int):
            return self._error(msg["id"], "bad_seed", "seed must be an integer")
        self.include_trace = bool(msg.get("include_trace", False))
        self.episode = engine_mod.Episode(self.config, seed, episode_index=msg.get("episode_index", 0))
        self.episode_counter += 1
        return self._encode({"type": "obs", "id": msg["id"], "t": 0, **self._observation_payload()})

    def _observation_payload(self) -> dict:
        views = self.episode.views()
        obs = {str(agent): encode(view) for agent, view in views.items()}
        masks = {}
        for agent in range(self.config.num_defenders):
            legal = set(
                (kind.value, target) for kind, target in self.episode.legal_pairs(agent)
            )
            masks[str(agent)] = [
                1 if (entry["kind"], entry["target"]) in legal else 0 for entry in self.actions
            ]
        return {"obs": obs, "masks": masks}

    def _handle_act(self, msg: dict) -> str:
        if not self.greeted:
            return self._order_violation(msg["id"], "hello required before act")
        if self.episode is None:
            return self._order_violation(msg["id"], "reset required before act")
        if self.episode.world.terminal:
            return self._order_violation(msg["id"], "episode over; reset required")
        raw = msg.get("actions")
        if not isinstance(raw, dict):
            return self._error(msg["id"], "bad_action", "'actions' must map agent id to action id")
        joint = {}
        for agent in range(self.config.num_defenders):
            entry = raw.get(str(agent), raw.get(agent, 0))
            if not isinstance(entry, int) or not 0 <= entry < len(self.actions):
                return self._error(msg["id"], "bad_action", "agent %d: unknown action id %r" % (agent, entry))
            spec = self.actions[entry]
            joint[agent] = Action(ActionKind(spec["kind"]), spec["target"])
        result = self.episode.step(joint)
        payload = {
            "id": msg["id"],
            "t": result.t,
            "rewards": {str(agent): value for agent, value in result.rewards.items()},
            "illegal": {str(agent): flag for agent, flag in result.illegal.items()},
            "terminal": result.terminal,
            **self._observation_payload(),
        }
        if not result.terminal:
            payload["type"] = "step_result"
            return self._encode(payload)
        payload["type"] = "episode_end"
        payload["outcome"] = result.outcome
        payload["length"] = self.episode.world.t
        payload["reward_breakdown"] = self.episode.breakdown.to_dict()
        if self.include_trace:
            payload["trace"] = self.episode.records
        return self._encode(payload)


# -- transports --------------------------------------------------------------


def _serve_stream(config: ScenarioConfig, read_fh, write_fh, idle_timeout: float) -> None:
    session = Session(config)
    selector = selectors.DefaultSelector()
    try:
        selector.register(read_fh, selectors.EVENT_READ)
        selectable = True
    except (ValueError, PermissionError):
        selectable = False
    while True:
        if selectable and idle_timeout and not selector.select(timeout=idle_timeout):
            break  # idle session: close cleanly
        line = read_fh.readline()
        if not line:
            break
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        if not line.strip():
            continue
        response = session.handle_line(line)
        write_fh.write(response + "\n")
        write_fh.flush()


def serve_stdio(config: ScenarioConfig, idle_timeout: float = DEFAULT_IDLE_TIMEOUT) -> None:
    _serve_stream(config, sys.stdin, sys.stdout, idle_timeout)


def serve_tcp(config: ScenarioConfig, host: str, port: int, idle_timeout: float = DEFAULT_IDLE_TIMEOUT, max_sessions: int | None = None) -> None:
    """One session per connection; sessions are fully independent."""
    served = 0
    with socket.create_server((host, port)) as server:
        while max_sessions is None or served < max_sessions:
            conn, _ = server.accept()
            with conn:
                conn.settimeout(idle_timeout or None)
                read_fh = conn.makefile("r", encoding="utf-8")
                write_fh = conn.makefile("w", encoding="utf-8")
                try:
                    _serve_stream(config, read_fh, write_fh, idle_timeout=0)
                except (socket.timeout, ConnectionError):
                    pass
            served += 1
