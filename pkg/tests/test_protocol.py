import json
import random

import pytest

from ipmsrl import engine, protocol
from ipmsrl.defense import Action, ActionKind
from ipmsrl.observation import encode, encoded_length
from ipmsrl.scenario import config_hash, load_micro_scenario


@pytest.fixture
def session():
    return protocol.Session(load_micro_scenario())


def send(session, **msg):
    return json.loads(session.handle_line(json.dumps(msg)))


def test_action_table_shape():
    config = load_micro_scenario()
    table = protocol.action_table(config)
    assert table[0] == {"kind": "wait", "target": None}
    # micro topology: 3 infectable nodes x 3 actions + critical recover + wait
    assert len(table) == 11
    assert len({(e["kind"], e["target"]) for e in table}) == len(table)


def test_hello_handshake(session):
    reply = send(session, type="hello", id=1, protocol=protocol.PROTOCOL_VERSION)
    assert reply["type"] == "hello"
    assert reply["protocol"] == "ipmsrl-proto/1"
    assert reply["layout"] == "ipmsrl-obs/1"
    assert reply["agents"] == [0]
    assert reply["obs_length"] == encoded_length(4)
    assert reply["scenario_hash"] == config_hash(session.config)
    assert [tuple(sorted(a.items())) for a in reply["actions"]] == [
        tuple(sorted(a.items())) for a in session.actions
    ]


def test_hello_version_mismatch(session):
    reply = send(session, type="hello", id=1, protocol="ipmsrl-proto/99")
    assert reply["type"] == "error"
    assert reply["code"] == "version_mismatch"


def test_parse_and_id_errors(session):
    assert json.loads(session.handle_line("not json"))["code"] == "parse_error"
    assert json.loads(session.handle_line('"a string"'))["code"] == "parse_error"
    assert send(session, type="hello")["code"] == "bad_id"
    send(session, type="hello", id=5)
    reply = send(session, type="hello", id=5)
    assert reply["code"] == "bad_id"
    reply = send(session, type="hello", id=4)
    assert reply["code"] == "bad_id"
    assert send(session, type="hello", id=6)["type"] == "hello"


def test_order_violations(session):
    assert send(session, type="reset", id=1, seed=0)["code"] == "protocol_order"
    assert send(session, type="act", id=2, actions={"0": 0})["code"] == "protocol_order"
    send(session, type="hello", id=3)
    assert send(session, type="act", id=4, actions={"0": 0})["code"] == "protocol_order"
    assert send(session, type="bogus", id=5)["code"] == "bad_type"


def test_reset_returns_initial_observation(session):
    send(session, type="hello", id=1)
    reply = send(session, type="reset", id=2, seed=12)
    assert reply["type"] == "obs"
    assert reply["t"] == 0
    episode = engine.Episode(session.config, seed=12)
    assert reply["obs"]["0"] == encode(episode.views()[0])
    mask = reply["masks"]["0"]
    assert len(mask) == len(session.actions)
    legal = {(k.value, t) for k, t in episode.legal_pairs(0)}
    for bit, entry in zip(mask, session.actions):
        assert bit == (1 if (entry["kind"], entry["target"]) in legal else 0)


def test_act_matches_in_process_episode(session):
    send(session, type="hello", id=1)
    send(session, type="reset", id=2, seed=7)
    episode = engine.Episode(session.config, seed=7)
    rng = random.Random(42)
    msg_id = 3
    while True:
        mask_legal = [i for i, entry in enumerate(session.actions)]
        choice = rng.choice(mask_legal)
        entry = session.actions[choice]
        reply = send(session, type="act", id=msg_id, actions={"0": choice})
        result = episode.step({0: Action(ActionKind(entry["kind"]), entry["target"])})
        msg_id += 1
        assert reply["t"] == result.t
        assert reply["rewards"]["0"] == result.rewards[0]
        assert reply["illegal"]["0"] == result.illegal[0]
        assert reply["obs"]["0"] == encode(result.views[0])
        if result.terminal:
            assert reply["type"] == "episode_end"
            assert reply["outcome"] == result.outcome
            assert reply["length"] == episode.world.t
            assert reply["reward_breakdown"] == episode.breakdown.to_dict()
            break
        assert reply["type"] == "step_result"
    # stepping a finished episode is an order violation
    reply = send(session, type="act", id=msg_id, actions={"0": 0})
    assert reply["code"] == "protocol_order"


def test_bad_action_payloads(session):
    send(session, type="hello", id=1)
    send(session, type="reset", id=2, seed=0)
    assert send(session, type="act", id=3)["code"] == "bad_action"
    assert send(session, type="act", id=4, actions={"0": 99})["code"] == "bad_action"
    assert send(session, type="act", id=5, actions={"0": "contain"})["code"] == "bad_action"
    # the episode survives bad requests
    assert send(session, type="act", id=6, actions={"0": 0})["type"] in ("step_result", "episode_end")


def test_reset_include_trace(session):
    send(session, type="hello", id=1)
    send(session, type="reset", id=2, seed=3, include_trace=True)
    msg_id = 3
    while True:
        reply = send(session, type="act", id=msg_id, actions={"0": 0})
        msg_id += 1
        if reply["type"] == "episode_end":
            break
    records = reply["trace"]
    assert records[0]["type"] == "header"
    assert records[-1]["type"] == "footer"
    episode = engine.Episode(session.config, seed=3)
    while not episode.world.terminal:
        episode.step({0: Action(ActionKind.WAIT, None)})
    assert records == json.loads(json.dumps(episode.records))


def test_bad_seed_type(session):
    send(session, type="hello", id=1)
    assert send(session, type="reset", id=2, seed="zero")["code"] == "bad_seed"
