"""Scenario configuration: parsing, strict validation, topology semantics.

A scenario is a UTF-8 JSON document. The schema is strict: unknown keys
anywhere in the document are rejected so misspelled options cannot be
silently ignored. Every error message carries the offending field path.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

from .kill_chain import MAX_STAGE, DEFAULT_LATERAL_GATE_STAGE, SeverityBand, SeverityBands, band_rank


class ScenarioError(ValueError):
    """Schema or invariant violation in a scenario document."""


class NodeKind(str, Enum):
    HMI = "hmi"
    RTU = "rtu"
    LOP = "lop"
    PLC = "plc"
    SWITCH = "switch"
    CRITICAL_CWP = "critical_cwp"
    CRITICAL_PROPULSION = "critical_propulsion"

    @property
    def is_critical(self) -> bool:
        return self in (NodeKind.CRITICAL_CWP, NodeKind.CRITICAL_PROPULSION)

    @property
    def is_switch(self) -> bool:
        return self is NodeKind.SWITCH

    @property
    def is_infectable_noncritical(self) -> bool:
        return not self.is_critical and not self.is_switch


ACTION_NAMES = ("contain", "eradicate", "recover", "wait")
ALERT_TRIGGERS = (
    "initial_infection_attempt",
    "stage_progression",
    "lateral_move_source",
    "lateral_move_target",
)

_BAND_KEYS = ("low", "medium", "high")


@dataclass(frozen=True)
class TopologySpec:
    nodes: tuple[tuple[str, NodeKind], ...]
    links: tuple[tuple[str, str], ...]
    backbone: tuple[str, ...]

    def kinds(self) -> dict[str, NodeKind]:
        return dict(self.nodes)

    def non_switch_ids(self) -> list[str]:
        return sorted(nid for nid, kind in self.nodes if not kind.is_switch)

    def critical_ids(self) -> list[str]:
        return sorted(nid for nid, kind in self.nodes if kind.is_critical)

    def infectable_ids(self) -> list[str]:
        return sorted(nid for nid, kind in self.nodes if kind.is_infectable_noncritical)


@dataclass(frozen=True)
class AttackerConfig:
    targeting_theta: float
    p_progress: float
    p_lateral_success: float
    initial_node: str  # node id, or "random"
    exclusive_action: bool = False  # progress OR move per node per step


@dataclass(frozen=True)
class DelayTable:
    """Timestep lag per (action, severity band). Wait and stage-0 targets cost 0."""

    contain: tuple[int, int, int] = (0, 1, 1)
    eradicate: tuple[int, int, int] = (1, 2, 3)
    recover: tuple[int, int, int] = (1, 1, 2)

    def delay(self, action: str, band: SeverityBand) -> int:
        if action == "wait" or band is SeverityBand.NONE:
            return 0
        row = getattr(self, action)
        return row[band_rank(band) - 1]

    def validate(self) -> None:
        for action in ("contain", "eradicate", "recover"):
            row = getattr(self, action)
            if any(d < 0 for d in row):
                raise ScenarioError("delays.%s: delays must be non-negative" % action)
            if not (row[0] <= row[1] <= row[2]):
                raise ScenarioError(
                    "delays.%s: delay must be monotone non-decreasing in severity" % action
                )


@dataclass(frozen=True)
class RewardConfig:
    preset: str = "balanced"  # "balanced" | "state_only"
    mission_weight: float = 1.0
    state_weight: float = 1.0
    action_weight: float = 1.0
    # state-generic conditions
    contained_clean_per_step: float = -0.01
    contained_clean_at_end: float = -0.05
    # per node kind: {distinct infected count threshold -> penalty}
    state_specific: dict = field(
        default_factory=lambda: {
            "hmi": {1: -0.05},
            "rtu": {1: -0.1, 2: -0.2},
            "lop": {1: -0.1, 2: -0.2},
            "plc": {1: -0.2, 2: -0.4},
        }
    )
    # per action: {band name -> penalty}; wait is always 0
    action_score: dict = field(
        default_factory=lambda: {
            action: {"none": -0.005, "low": -0.01, "medium": -0.02, "high": -0.04}
            for action in ("contain", "eradicate", "recover")
        }
    )


@dataclass(frozen=True)
class ScenarioConfig:
    topology: TopologySpec
    horizon_T: int
    num_defenders: int
    attacker: AttackerConfig
    alert_success_prob: float
    alert_triggers: tuple[str, ...]
    delays: DelayTable
    rewards: RewardConfig
    seed: int
    lateral_gate_stage: int = DEFAULT_LATERAL_GATE_STAGE
    severity_bands: SeverityBands = field(default_factory=SeverityBands)
    switches_infectable: bool = False
    contain_freezes_progression: bool = True
    raw: dict = field(default_factory=dict, compare=False, repr=False)


_TOP_LEVEL_KEYS = {
    "topology",
    "horizon_T",
    "num_defenders",
    "attacker",
    "alert_success_prob",
    "alert_triggers",
    "delays",
    "rewards",
    "seed",
    "lateral_gate_stage",
    "severity_bands",
    "switches_infectable",
    "contain_freezes_progression",
}


def _require_keys(obj: dict, allowed: set, required: set, path: str) -> None:
    if not isinstance(obj, dict):
        raise ScenarioError("%s: expected an object" % path)
    unknown = set(obj) - allowed
    if unknown:
        raise ScenarioError("%s: unknown key '%s'" % (path, sorted(unknown)[0]))
    missing = required - set(obj)
    if missing:
        raise ScenarioError("%s: missing required key '%s'" % (path, sorted(missing)[0]))


def _prob(value, path: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ScenarioError("%s: expected a number" % path)
    if not 0.0 <= value <= 1.0:
        raise ScenarioError("%s: probability out of range [0, 1]: %r" % (path, value))
    return float(value)


def _pos_int(value, path: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ScenarioError("%s: expected a positive integer" % path)
    return value


def _parse_topology(doc, path: str = "topology") -> TopologySpec:
    _require_keys(doc, {"nodes", "links", "backbone"}, {"nodes", "links", "backbone"}, path)
    nodes = []
    seen = set()
    for i, entry in enumerate(doc["nodes"]):
        npath = "%s.nodes[%d]" % (path, i)
        _require_keys(entry, {"id", "kind"}, {"id", "kind"}, npath)
        nid = entry["id"]
        if not isinstance(nid, str) or not nid:
            raise ScenarioError("%s.id: expected a non-empty string" % npath)
        if nid in seen:
            raise ScenarioError("%s.id: duplicate node id '%s'" % (npath, nid))
        seen.add(nid)
        try:
            kind = NodeKind(entry["kind"])
        except ValueError:
            raise ScenarioError("%s.kind: unknown node kind '%s'" % (npath, entry["kind"])) from None
        nodes.append((nid, kind))
    kinds = dict(nodes)

    links = []
    for i, pair in enumerate(doc["links"]):
        lpath = "%s.links[%d]" % (path, i)
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ScenarioError("%s: expected a two-element [a, b] pair" % lpath)
        a, b = pair
        for end in (a, b):
            if end not in kinds:
                raise ScenarioError("%s: link references unknown node '%s'" % (lpath, end))
        if a == b:
            raise ScenarioError("%s: self-link on '%s'" % (lpath, a))
        links.append((a, b))

    backbone = []
    for i, sid in enumerate(doc["backbone"]):
        bpath = "%s.backbone[%d]" % (path, i)
        if sid not in kinds:
            raise ScenarioError("%s: unknown node '%s'" % (bpath, sid))
        if kinds[sid] is not NodeKind.SWITCH:
            raise ScenarioError("%s: backbone node '%s' is not a switch" % (bpath, sid))
        backbone.append(sid)

    topo = TopologySpec(tuple(nodes), tuple(links), tuple(backbone))
    _validate_topology(topo, path)
    return topo


def _validate_topology(topo: TopologySpec, path: str) -> None:
    kinds = topo.kinds()
    linked = {}
    for a, b in topo.links:
        linked.setdefault(a, set()).add(b)
        linked.setdefault(b, set()).add(a)
    for crit in topo.critical_ids():
        plc_neighbors = [n for n in linked.get(crit, ()) if kinds[n] is NodeKind.PLC]
        if not plc_neighbors:
            raise ScenarioError(
                "%s: critical node '%s' has no link to a PLC" % (path, crit)
            )
    adjacency = effective_adjacency(topo)
    non_switch = topo.non_switch_ids()
    if len(non_switch) < 2:
        return
    seen = {non_switch[0]}
    frontier = [non_switch[0]]
    while frontier:
        cur = frontier.pop()
        for nxt in adjacency[cur]:
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    unreachable = sorted(set(non_switch) - seen)
    if unreachable:
        raise ScenarioError(
            "%s: effective adjacency graph is not connected; unreachable: %s"
            % (path, unreachable[0])
        )


def effective_adjacency(topo: TopologySpec) -> dict[str, frozenset[str]]:
    """Symmetric, irreflexive adjacency over non-switch nodes.

    Two non-switch nodes are adjacent iff directly linked, or each is
    directly linked to a switch: all switch-attached nodes form one
    interconnected fabric.
    """
    kinds = topo.kinds()
    neighbors: dict[str, set[str]] = {nid: set() for nid in topo.non_switch_ids()}
    fabric = set()
    for a, b in topo.links:
        ka, kb = kinds[a], kinds[b]
        if ka.is_switch and not kb.is_switch:
            fabric.add(b)
        elif kb.is_switch and not ka.is_switch:
            fabric.add(a)
        elif not ka.is_switch and not kb.is_switch:
            neighbors[a].add(b)
            neighbors[b].add(a)
    for a in fabric:
        for b in fabric:
            if a != b:
                neighbors[a].add(b)
    return {nid: frozenset(adj) for nid, adj in neighbors.items()}


def distance_to_critical(topo: TopologySpec) -> dict[str, int]:
    """Minimum lateral hops from each non-switch node to any critical node.

    Critical nodes map to 0; a PLC directly linked to a critical maps to 1.
    """
    adjacency = effective_adjacency(topo)
    dist = {nid: 0 for nid in topo.critical_ids()}
    frontier = sorted(dist)
    while frontier:
        nxt_frontier = []
        for cur in frontier:
            for nxt in sorted(adjacency[cur]):
                if nxt not in dist:
                    dist[nxt] = dist[cur] + 1
                    nxt_frontier.append(nxt)
        frontier = nxt_frontier
    return dist


def _parse_attacker(doc, topo: TopologySpec, path: str = "attacker") -> AttackerConfig:
    allowed = {"targeting_theta", "p_progress", "p_lateral_success", "initial_node", "exclusive_action"}
    _require_keys(doc, allowed, {"targeting_theta", "p_progress", "p_lateral_success"}, path)
    initial = doc.get("initial_node", "random")
    if not isinstance(initial, str):
        raise ScenarioError("%s.initial_node: expected a node id or 'random'" % path)
    if initial != "random":
        kinds = topo.kinds()
        if initial not in kinds:
            raise ScenarioError("%s.initial_node: unknown node '%s'" % (path, initial))
        if not kinds[initial].is_infectable_noncritical:
            raise ScenarioError(
                "%s.initial_node: '%s' is not a non-critical infectable node" % (path, initial)
            )
    exclusive = doc.get("exclusive_action", False)
    if not isinstance(exclusive, bool):
        raise ScenarioError("%s.exclusive_action: expected a boolean" % path)
    return AttackerConfig(
        targeting_theta=_prob(doc["targeting_theta"], path + ".targeting_theta"),
        p_progress=_prob(doc["p_progress"], path + ".p_progress"),
        p_lateral_success=_prob(doc["p_lateral_success"], path + ".p_lateral_success"),
        initial_node=initial,
        exclusive_action=exclusive,
    )


def _parse_delays(doc, path: str = "delays") -> DelayTable:
    allowed = {"contain", "eradicate", "recover"}
    _require_keys(doc, allowed, set(), path)
    defaults = DelayTable()
    rows = {}
    for action in allowed:
        row = doc.get(action)
        if row is None:
            rows[action] = getattr(defaults, action)
            continue
        if not (isinstance(row, list) and len(row) == 3 and all(isinstance(d, int) and not isinstance(d, bool) for d in row)):
            raise ScenarioError("%s.%s: expected [low, medium, high] integer delays" % (path, action))
        rows[action] = tuple(row)
    table = DelayTable(contain=rows["contain"], eradicate=rows["eradicate"], recover=rows["recover"])
    table.validate()
    return table


def _parse_penalty(value, path: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ScenarioError("%s: expected a number" % path)
    if value > 0:
        raise ScenarioError("%s: penalty must be <= 0" % path)
    return float(value)


def _parse_rewards(doc, path: str = "rewards") -> RewardConfig:
    allowed = {
        "preset",
        "mission_weight",
        "state_weight",
        "action_weight",
        "state_generic",
        "state_specific",
        "action_score",
    }
    _require_keys(doc, allowed, set(), path)
    defaults = RewardConfig()
    preset = doc.get("preset", "balanced")
    if preset not in ("balanced", "state_only"):
        raise ScenarioError("%s.preset: expected 'balanced' or 'state_only'" % path)

    def weight(key):
        value = doc.get(key, getattr(defaults, key))
        if not isinstance(value, (int, float)) or isinstance(value, bool) or value < 0:
            raise ScenarioError("%s.%s: expected a non-negative number" % (path, key))
        return float(value)

    mission_w, state_w, action_w = weight("mission_weight"), weight("state_weight"), weight("action_weight")
    if preset == "state_only":
        mission_w, action_w = 0.0, 0.0

    per_step = defaults.contained_clean_per_step
    at_end = defaults.contained_clean_at_end
    if "state_generic" in doc:
        gpath = path + ".state_generic"
        _require_keys(doc["state_generic"], {"contained_clean_per_step", "contained_clean_at_end"}, set(), gpath)
        if "contained_clean_per_step" in doc["state_generic"]:
            per_step = _parse_penalty(doc["state_generic"]["contained_clean_per_step"], gpath + ".contained_clean_per_step")
        if "contained_clean_at_end" in doc["state_generic"]:
            at_end = _parse_penalty(doc["state_generic"]["contained_clean_at_end"], gpath + ".contained_clean_at_end")

    specific = {k: dict(v) for k, v in defaults.state_specific.items()}
    if "state_specific" in doc:
        spath = path + ".state_specific"
        if not isinstance(doc["state_specific"], dict):
            raise ScenarioError("%s: expected an object" % spath)
        specific = {}
        for kind_name, table in doc["state_specific"].items():
            if kind_name not in [k.value for k in NodeKind if k is not NodeKind.SWITCH]:
                raise ScenarioError("%s: unknown node kind '%s'" % (spath, kind_name))
            if not isinstance(table, dict):
                raise ScenarioError("%s.%s: expected {count: penalty}" % (spath, kind_name))
            parsed = {}
            for count_key, penalty in table.items():
                try:
                    count = int(count_key)
                except (TypeError, ValueError):
                    raise ScenarioError("%s.%s: bad count threshold '%s'" % (spath, kind_name, count_key)) from None
                if count < 1:
                    raise ScenarioError("%s.%s: count threshold must be >= 1" % (spath, kind_name))
                parsed[count] = _parse_penalty(penalty, "%s.%s.%s" % (spath, kind_name, count_key))
            specific[kind_name] = parsed

    scores = {k: dict(v) for k, v in defaults.action_score.items()}
    if "action_score" in doc:
        apath = path + ".action_score"
        _require_keys(doc["action_score"], {"contain", "eradicate", "recover"}, set(), apath)
        for action, table in doc["action_score"].items():
            _require_keys(table, {"none", "low", "medium", "high"}, set(), "%s.%s" % (apath, action))
            for band_name, penalty in table.items():
                scores[action][band_name] = _parse_penalty(penalty, "%s.%s.%s" % (apath, action, band_name))
            row = scores[action]
            if not (row["none"] >= row["low"] >= row["medium"] >= row["high"]):
                raise ScenarioError(
                    "%s.%s: penalties must be monotone non-increasing in severity" % (apath, action)
                )
    return RewardConfig(
        preset=preset,
        mission_weight=mission_w,
        state_weight=state_w,
        action_weight=action_w,
        contained_clean_per_step=per_step,
        contained_clean_at_end=at_end,
        state_specific=specific,
        action_score=scores,
    )


def load_scenario(text: str) -> ScenarioConfig:
    """Parse and validate a scenario document, filling documented defaults."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("scenario is not valid JSON: %s" % exc) from None
    _require_keys(doc, _TOP_LEVEL_KEYS, {"topology", "attacker"}, "scenario")

    topo = _parse_topology(doc["topology"])
    attacker = _parse_attacker(doc["attacker"], topo)

    horizon = _pos_int(doc.get("horizon_T", 50), "horizon_T")
    defenders = _pos_int(doc.get("num_defenders", 2), "num_defenders")
    p_alert = _prob(doc.get("alert_success_prob", 1.0), "alert_success_prob")

    triggers = doc.get("alert_triggers", list(ALERT_TRIGGERS))
    if not isinstance(triggers, list):
        raise ScenarioError("alert_triggers: expected a list")
    for trig in triggers:
        if trig not in ALERT_TRIGGERS:
            raise ScenarioError("alert_triggers: unknown trigger '%s'" % trig)

    delays = _parse_delays(doc.get("delays", {}))
    rewards = _parse_rewards(doc.get("rewards", {}))

    seed = doc.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise ScenarioError("seed: expected an unsigned 64-bit integer")

    gate = doc.get("lateral_gate_stage", DEFAULT_LATERAL_GATE_STAGE)
    if not isinstance(gate, int) or isinstance(gate, bool) or not 1 <= gate <= MAX_STAGE:
        raise ScenarioError("lateral_gate_stage: expected an integer in [1, %d]" % MAX_STAGE)

    bands = SeverityBands()
    if "severity_bands" in doc:
        bpath = "severity_bands"
        _require_keys(doc["severity_bands"], set(_BAND_KEYS), set(_BAND_KEYS), bpath)
        rows = {}
        for key in _BAND_KEYS:
            row = doc["severity_bands"][key]
            if not (isinstance(row, list) and len(row) == 2 and all(isinstance(v, int) for v in row)):
                raise ScenarioError("%s.%s: expected [first, last] stage bounds" % (bpath, key))
            rows[key] = tuple(row)
        bands = SeverityBands(low=rows["low"], medium=rows["medium"], high=rows["high"])
        try:
            bands.validate()
        except ValueError as exc:
            raise ScenarioError("severity_bands: %s" % exc) from None

    switches_infectable = doc.get("switches_infectable", False)
    if not isinstance(switches_infectable, bool):
        raise ScenarioError("switches_infectable: expected a boolean")
    if switches_infectable:
        raise ScenarioError("switches_infectable: true is reserved and not yet supported")

    freezes = doc.get("contain_freezes_progression", True)
    if not isinstance(freezes, bool):
        raise ScenarioError("contain_freezes_progression: expected a boolean")

    config = ScenarioConfig(
        topology=topo,
        horizon_T=horizon,
        num_defenders=defenders,
        attacker=attacker,
        alert_success_prob=p_alert,
        alert_triggers=tuple(triggers),
        delays=delays,
        rewards=rewards,
        seed=seed,
        lateral_gate_stage=gate,
        severity_bands=bands,
        switches_infectable=switches_infectable,
        contain_freezes_progression=freezes,
        raw=doc,
    )
    return config


def load_scenario_file(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return load_scenario(fh.read())


def config_to_dict(config: ScenarioConfig) -> dict:
    """Canonical dict of a validated config with all defaults filled in."""
    return {
        "topology": {
            "nodes": [{"id": nid, "kind": kind.value} for nid, kind in config.topology.nodes],
            "links": [list(pair) for pair in config.topology.links],
            "backbone": list(config.topology.backbone),
        },
        "horizon_T": config.horizon_T,
        "num_defenders": config.num_defenders,
        "attacker": {
            "targeting_theta": config.attacker.targeting_theta,
            "p_progress": config.attacker.p_progress,
            "p_lateral_success": config.attacker.p_lateral_success,
            "initial_node": config.attacker.initial_node,
            "exclusive_action": config.attacker.exclusive_action,
        },
        "alert_success_prob": config.alert_success_prob,
        "alert_triggers": list(config.alert_triggers),
        "delays": {
            "contain": list(config.delays.contain),
            "eradicate": list(config.delays.eradicate),
            "recover": list(config.delays.recover),
        },
        "rewards": {
            "preset": config.rewards.preset,
            "mission_weight": config.rewards.mission_weight,
            "state_weight": config.rewards.state_weight,
            "action_weight": config.rewards.action_weight,
            "state_generic": {
                "contained_clean_per_step": config.rewards.contained_clean_per_step,
                "contained_clean_at_end": config.rewards.contained_clean_at_end,
            },
            "state_specific": {
                kind: {str(count): pen for count, pen in sorted(table.items())}
                for kind, table in sorted(config.rewards.state_specific.items())
            },
            "action_score": {
                action: dict(sorted(table.items()))
                for action, table in sorted(config.rewards.action_score.items())
            },
        },
        "seed": config.seed,
        "lateral_gate_stage": config.lateral_gate_stage,
        "severity_bands": {
            "low": list(config.severity_bands.low),
            "medium": list(config.severity_bands.medium),
            "high": list(config.severity_bands.high),
        },
        "switches_infectable": config.switches_infectable,
        "contain_freezes_progression": config.contain_freezes_progression,
    }


def config_hash(config: ScenarioConfig) -> str:
    canonical = json.dumps(config_to_dict(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def default_scenario_text() -> str:
    return resources.files("ipmsrl.data").joinpath("default_scenario.json").read_text("utf-8")


def micro_scenario_text() -> str:
    return resources.files("ipmsrl.data").joinpath("micro_scenario.json").read_text("utf-8")


def load_default_scenario() -> ScenarioConfig:
    return load_scenario(default_scenario_text())


def load_micro_scenario() -> ScenarioConfig:
    return load_scenario(micro_scenario_text())


def override_key(config: ScenarioConfig, dotted_key: str, value) -> ScenarioConfig:
    """Return a new validated config with one dotted-path key replaced."""
    doc = json.loads(json.dumps(config_to_dict(config)))
    parts = dotted_key.split(".")
    target = doc
    for part in parts[:-1]:
        if not isinstance(target, dict) or part not in target:
            raise ScenarioError("override: unknown key path '%s'" % dotted_key)
        target = target[part]
    if not isinstance(target, dict) or parts[-1] not in target:
        raise ScenarioError("override: unknown key path '%s'" % dotted_key)
    target[parts[-1]] = value
    return load_scenario(json.dumps(doc))
