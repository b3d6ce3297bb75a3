"""Protocol client: drives an environment server over NDJSON stdio.

The server is spawned as a subprocess (`python -m ipmsrl.cli serve`); the
client owns the process and speaks only the documented `ipmsrl-proto/1`
protocol, so the environment could equally live in another language or on
the other end of a TCP socket.
"""

from __future__ import annotations

import json
import subprocess
import sys
from dataclasses import dataclass
from importlib import resources

import numpy as np

PROTOCOL_VERSION = "ipmsrl-proto/1"
LAYOUT_VERSION = "ipmsrl-obs/1"

OUTCOME_SCORE = {"win": 1.0, "draw": 0.5, "loss": 0.0}


def packaged_scenario(name: str = "micro") -> str:
    """Filesystem path of a scenario bundled with the trainer."""
    return str(resources.files("ipmsrl_trainer.data").joinpath(name + ".json"))


class ProtocolError(RuntimeError):
    pass


@dataclass
class StepPayload:
    t: int
    obs: dict[int, np.ndarray]
    masks: dict[int, np.ndarray]
    rewards: dict[int, float]
    illegal: dict[int, bool]
    terminal: bool
    outcome: str | None = None
    length: int | None = None
    reward_breakdown: dict | None = None
    trace: list | None = None


class EnvClient:
    """One live environment session over a spawned server process."""

    def __init__(self, scenario_path: str, server_cmd: list[str] | None = None):
        cmd = server_cmd or [sys.executable, "-m", "ipmsrl.cli", "serve", "--scenario", scenario_path]
        self.proc = subprocess.Popen(
            cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1
        )
        self._next_id = 1
        hello = self._call({"type": "hello", "protocol": PROTOCOL_VERSION})
        if hello.get("type") != "hello":
            raise ProtocolError("handshake failed: %r" % hello)
        if hello["protocol"] != PROTOCOL_VERSION or hello["layout"] != LAYOUT_VERSION:
            raise ProtocolError(
                "version mismatch: server speaks %s/%s" % (hello["protocol"], hello["layout"])
            )
        self.agents: list[int] = hello["agents"]
        self.obs_length: int = hello["obs_length"]
        self.actions: list[dict] = hello["actions"]
        self.num_actions = len(self.actions)
        self.horizon: int = hello["horizon_T"]
        self.scenario_hash: str = hello["scenario_hash"]

    # -- transport ----------------------------------------------------------

    def _call(self, msg: dict) -> dict:
        msg = dict(msg)
        msg["id"] = self._next_id
        self._next_id += 1
        self.proc.stdin.write(json.dumps(msg) + "\n")
        self.proc.stdin.flush()
        line = self.proc.stdout.readline()
        if not line:
            raise ProtocolError("server closed the stream")
        reply = json.loads(line)
        if reply.get("type") == "error":
            raise ProtocolError("%s: %s" % (reply.get("code"), reply.get("message")))
        return reply

    def close(self) -> None:
        if self.proc.poll() is None:
            self.proc.stdin.close()
            self.proc.wait(timeout=10)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- environment API ----------------------------------------------------

    def _unpack(self, reply: dict) -> StepPayload:
        obs = {a: np.asarray(reply["obs"][str(a)], dtype=np.float32) for a in self.agents}
        masks = {a: np.asarray(reply["masks"][str(a)], dtype=np.int8) for a in self.agents}
        return StepPayload(
            t=reply["t"],
            obs=obs,
            masks=masks,
            rewards={a: reply["rewards"][str(a)] for a in self.agents} if "rewards" in reply else {},
            illegal={a: reply["illegal"][str(a)] for a in self.agents} if "illegal" in reply else {},
            terminal=reply.get("terminal", False),
            outcome=reply.get("outcome"),
            length=reply.get("length"),
            reward_breakdown=reply.get("reward_breakdown"),
            trace=reply.get("trace"),
        )

    def reset(self, seed: int, episode_index: int = 0, include_trace: bool = False) -> StepPayload:
        return self._unpack(
            self._call(
                {"type": "reset", "seed": seed, "episode_index": episode_index, "include_trace": include_trace}
            )
        )

    def step(self, actions: dict[int, int]) -> StepPayload:
        return self._unpack(
            self._call({"type": "act", "actions": {str(a): int(i) for a, i in actions.items()}})
        )


def random_rollout_score(client: EnvClient, episodes: int, seed: int, rng: np.random.Generator) -> float:
    """Mean outcome score of mask-uniform random play; the training baseline."""
    total = 0.0
    for i in range(episodes):
        payload = client.reset(seed=seed + i, episode_index=i)
        while not payload.terminal:
            actions = {
                a: int(rng.choice(np.flatnonzero(payload.masks[a]))) for a in client.agents
            }
            payload = client.step(actions)
        total += OUTCOME_SCORE[payload.outcome]
    return total / episodes
