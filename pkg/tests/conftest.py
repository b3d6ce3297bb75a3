"""Shared test helpers: scenario fuzzing and instrumented episode drivers."""

from __future__ import annotations

import json
import random

import pytest

from ipmsrl import engine
from ipmsrl.scenario import ScenarioConfig, load_scenario

NODE_KIND_POOL = ("hmi", "rtu", "lop", "plc")


def fuzz_scenario_doc(rng: random.Random) -> dict:
    """Random small-but-valid scenario document.

    Always contains one PLC, one critical node linked to it, and a connected
    set of infectable nodes (either via a switch fabric or a random tree).
    """
    n_extra = rng.randint(1, 5)
    nodes = [{"id": "plc0", "kind": "plc"}]
    for i in range(n_extra):
        nodes.append({"id": "n%d" % i, "kind": rng.choice(NODE_KIND_POOL)})
    nodes.append({"id": "crit0", "kind": rng.choice(["critical_cwp", "critical_propulsion"])})
    ids = ["plc0"] + ["n%d" % i for i in range(n_extra)]
    links = [["crit0", "plc0"]]
    if rng.random() < 0.5:
        nodes.append({"id": "sw0", "kind": "switch"})
        backbone = ["sw0"]
        for nid in ids:
            links.append([nid, "sw0"])
    else:
        backbone = []
        for i in range(1, len(ids)):
            links.append([ids[i], ids[rng.randrange(i)]])
    return {
        "topology": {"nodes": nodes, "links": links, "backbone": backbone},
        "horizon_T": rng.randint(8, 25),
        "num_defenders": rng.randint(1, 3),
        "attacker": {
            "targeting_theta": round(rng.random(), 3),
            "p_progress": round(rng.uniform(0.1, 0.9), 3),
            "p_lateral_success": round(rng.uniform(0.1, 0.9), 3),
            "initial_node": rng.choice(["random", "plc0"]),
        },
        "alert_success_prob": round(rng.random(), 3),
        "seed": rng.randrange(2**32),
    }


def fuzz_scenario(rng: random.Random) -> ScenarioConfig:
    return load_scenario(json.dumps(fuzz_scenario_doc(rng)))


def run_collect(config: ScenarioConfig, seed: int, policy_factory, episode_index: int = 0):
    """Drive an episode to termination, summing the delivered reward shares.

    Returns (episode, delivered per agent, per-step equal-split flag).
    """
    policies = {agent: policy_factory() for agent in range(config.num_defenders)}
    episode = engine.Episode(config, seed, episode_index=episode_index)
    views = episode.views()
    delivered = {agent: 0.0 for agent in range(config.num_defenders)}
    equal_split = True
    while not episode.world.terminal:
        joint = {
            agent: policies[agent](agent, views[agent], episode.legal_pairs(agent), episode.policy_rng)
            for agent in range(config.num_defenders)
        }
        result = episode.step(joint)
        if len(set(result.rewards.values())) > 1:
            equal_split = False
        for agent, value in result.rewards.items():
            delivered[agent] += value
        views = result.views
    return episode, delivered, equal_split


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)
