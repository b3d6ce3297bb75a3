import random

from ipmsrl.alerting import (
    Alert,
    TRIGGER_INITIAL_ATTEMPT,
    TRIGGER_LATERAL_SOURCE,
    TRIGGER_LATERAL_TARGET,
    TRIGGER_PROGRESSION,
    alert_candidates,
    emit_alerts,
    update_store,
)

EVENTS = [
    {"type": "attack", "kind": "progression", "t": 3, "node": "a", "stage": 5},
    {"type": "attack", "kind": "lateral_attempt", "t": 3, "source": "a", "target": "b"},
    {"type": "attack", "kind": "lateral_success", "t": 3, "source": "a", "target": "b", "target_stage": 1},
]


def test_candidates_cover_all_triggers_in_event_order():
    assert alert_candidates(EVENTS) == [
        ("a", TRIGGER_PROGRESSION),
        ("b", TRIGGER_INITIAL_ATTEMPT),
        ("a", TRIGGER_LATERAL_SOURCE),
        ("b", TRIGGER_LATERAL_TARGET),
    ]


def test_failed_attempt_still_alerts_on_target():
    events = [EVENTS[1]]  # attempt without success
    assert alert_candidates(events) == [("b", TRIGGER_INITIAL_ATTEMPT)]


def all_triggers():
    return (TRIGGER_INITIAL_ATTEMPT, TRIGGER_PROGRESSION, TRIGGER_LATERAL_SOURCE, TRIGGER_LATERAL_TARGET)


def test_emit_all_at_probability_one():
    candidates = alert_candidates(EVENTS)
    alerts = emit_alerts(candidates, 1.0, all_triggers(), lambda nid: 5, 3, random.Random(0))
    assert len(alerts) == len(candidates)
    assert all(a.timestep == 3 and a.stage_at_alert == 5 for a in alerts)


def test_emit_none_at_probability_zero():
    candidates = alert_candidates(EVENTS)
    assert emit_alerts(candidates, 0.0, all_triggers(), lambda nid: 5, 3, random.Random(0)) == []


def test_disabled_triggers_are_filtered():
    candidates = alert_candidates(EVENTS)
    alerts = emit_alerts(candidates, 1.0, (TRIGGER_PROGRESSION,), lambda nid: 5, 3, random.Random(0))
    assert [a.trigger for a in alerts] == [TRIGGER_PROGRESSION]


def test_emission_rate_is_binomial():
    candidates = [("n%d" % i, TRIGGER_PROGRESSION) for i in range(5000)]
    alerts = emit_alerts(candidates, 0.5, all_triggers(), lambda nid: 1, 0, random.Random(77))
    # Binomial(5000, 0.5): 2500 expected, 150 is about 4.2 sigma
    assert abs(len(alerts) - 2500) < 150


def test_alert_stage_is_a_static_snapshot():
    stages = {"a": 4}
    alerts = emit_alerts([("a", TRIGGER_PROGRESSION)], 1.0, all_triggers(), stages.get, 1, random.Random(0))
    stages["a"] = 9  # the node keeps degrading after the alert fired
    assert alerts[0].stage_at_alert == 4


def test_store_keeps_most_recent_per_node():
    store = {}
    first = Alert("a", 2, 1, TRIGGER_PROGRESSION)
    second = Alert("a", 7, 4, TRIGGER_PROGRESSION)
    other = Alert("b", 1, 2, TRIGGER_INITIAL_ATTEMPT)
    update_store(store, [first, other])
    assert store["a"] is first
    update_store(store, [second])
    assert store["a"] is second
    assert store["b"] is other
