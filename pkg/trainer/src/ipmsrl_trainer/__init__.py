"""Multi-agent PPO trainer for the IPMS defense environment.

Talks to the environment only through its NDJSON step protocol, spawning
`python -m ipmsrl.cli serve` as a subprocess. Two arms are provided that
differ only in critic wiring: independent per-agent critics ("ippo") and a
single centralized critic over the concatenated observations ("mappo").
"""

from .client import (
    EnvClient,
    ProtocolError,
    StepPayload,
    packaged_scenario,
    random_rollout_score,
)
from .ppo import Learner, TrainConfig, config_diff, evaluate, make_config, train

__all__ = [
    "EnvClient",
    "ProtocolError",
    "StepPayload",
    "packaged_scenario",
    "random_rollout_score",
    "Learner",
    "TrainConfig",
    "config_diff",
    "evaluate",
    "make_config",
    "train",
]
