"""IPMSRL: a deterministic multi-agent cyber-defence simulation of a
maritime integrated platform management system, with baselines, an
experiment harness, and a wire protocol for external trainers."""

from .defense import Action, ActionKind
from .engine import Episode, reset, run_episode
from .observation import DefenderView, encode
from .reward import RewardBreakdown
from .scenario import (
    NodeKind,
    ScenarioConfig,
    ScenarioError,
    load_default_scenario,
    load_micro_scenario,
    load_scenario,
    load_scenario_file,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ActionKind",
    "DefenderView",
    "Episode",
    "NodeKind",
    "RewardBreakdown",
    "ScenarioConfig",
    "ScenarioError",
    "encode",
    "load_default_scenario",
    "load_micro_scenario",
    "load_scenario",
    "load_scenario_file",
    "reset",
    "run_episode",
]
