"""PPO training over the step protocol: independent critics (IPPO) or a
shared centralized critic (MAPPO).

Both arms share every hyperparameter and the whole data path; the only
configuration difference is the critic wiring, and `config_diff` proves it
in the run report. Policies are per-agent in both arms; action masks from
the server are applied to the logits so illegal actions are never sampled.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .client import OUTCOME_SCORE, EnvClient


@dataclass(frozen=True)
class TrainConfig:
    algo: str
    critic: str  # "independent" (IPPO) | "centralized" (MAPPO)
    hidden: int = 64
    lr: float = 1e-3
    gamma: float = 0.99
    gae_lambda: float = 0.95
    clip: float = 0.2
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    max_grad_norm: float = 0.5
    rollout_steps: int = 256
    update_epochs: int = 4
    minibatches: int = 4
    total_steps: int = 100_000
    seed: int = 0


def make_config(algo: str, **overrides) -> TrainConfig:
    wiring = {"ippo": "independent", "mappo": "centralized"}
    if algo not in wiring:
        raise ValueError("unknown algorithm '%s'" % algo)
    return TrainConfig(algo=algo, critic=wiring[algo], **overrides)


def config_diff(a: TrainConfig, b: TrainConfig) -> dict:
    """Fields on which two training configs disagree."""
    out = {}
    for field in dataclasses.fields(TrainConfig):
        va, vb = getattr(a, field.name), getattr(b, field.name)
        if va != vb:
            out[field.name] = [va, vb]
    return out


def mlp(in_dim: int, hidden: int, out_dim: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Linear(in_dim, hidden),
        nn.Tanh(),
        nn.Linear(hidden, hidden),
        nn.Tanh(),
        nn.Linear(hidden, out_dim),
    )


def masked_logits(logits: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    return logits.masked_fill(mask == 0, -1e9)


class Learner:
    """Actors, critic(s), and the PPO update for one training arm."""

    def __init__(self, client: EnvClient, cfg: TrainConfig):
        self.client = client
        self.cfg = cfg
        self.agents = client.agents
        n_obs, n_act = client.obs_length, client.num_actions
        torch.manual_seed(cfg.seed)
        self.actors = {a: mlp(n_obs, cfg.hidden, n_act) for a in self.agents}
        if cfg.critic == "centralized":
            shared = mlp(n_obs * len(self.agents), cfg.hidden, 1)
            self.critics = {a: shared for a in self.agents}
        else:
            self.critics = {a: mlp(n_obs, cfg.hidden, 1) for a in self.agents}
        params = [p for actor in self.actors.values() for p in actor.parameters()]
        seen = set()
        for critic in self.critics.values():
            if id(critic) not in seen:
                seen.add(id(critic))
                params.extend(critic.parameters())
        self.optimizer = torch.optim.Adam(params, lr=cfg.lr)

    # -- acting ---------------------------------------------------------------

    def _critic_input(self, obs: dict[int, np.ndarray]) -> dict[int, torch.Tensor]:
        if self.cfg.critic == "centralized":
            joint = torch.as_tensor(np.concatenate([obs[a] for a in self.agents]))
            return {a: joint for a in self.agents}
        return {a: torch.as_tensor(obs[a]) for a in self.agents}

    @torch.no_grad()
    def act(self, payload, greedy: bool = False):
        actions, logps, values = {}, {}, {}
        critic_in = self._critic_input(payload.obs)
        for a in self.agents:
            obs = torch.as_tensor(payload.obs[a])
            mask = torch.as_tensor(payload.masks[a], dtype=torch.bool)
            logits = masked_logits(self.actors[a](obs), mask)
            dist = torch.distributions.Categorical(logits=logits)
            action = logits.argmax() if greedy else dist.sample()
            actions[a] = int(action)
            logps[a] = float(dist.log_prob(action))
            values[a] = float(self.critics[a](critic_in[a]).squeeze(-1))
        return actions, logps, values

    # -- training -------------------------------------------------------------

    def collect(self, payload, seed: int, episode_index: int):
        """One rollout of cfg.rollout_steps transitions (episodes roll over)."""
        cfg = self.cfg
        buf = {
            a: {k: [] for k in ("obs", "joint", "mask", "act", "logp", "rew", "done", "val")}
            for a in self.agents
        }
        outcomes = []
        for _ in range(cfg.rollout_steps):
            actions, logps, values = self.act(payload)
            critic_in = self._critic_input(payload.obs)
            nxt = self.client.step(actions)
            for a in self.agents:
                buf[a]["obs"].append(payload.obs[a])
                buf[a]["joint"].append(critic_in[a].numpy())
                buf[a]["mask"].append(payload.masks[a])
                buf[a]["act"].append(actions[a])
                buf[a]["logp"].append(logps[a])
                buf[a]["rew"].append(nxt.rewards[a])
                buf[a]["done"].append(nxt.terminal)
                buf[a]["val"].append(values[a])
            if nxt.terminal:
                outcomes.append(OUTCOME_SCORE[nxt.outcome])
                episode_index += 1
                payload = self.client.reset(seed=seed, episode_index=episode_index)
            else:
                payload = nxt
        # bootstrap value for the state after the last stored transition
        _, _, tail_values = self.act(payload)
        return payload, episode_index, buf, tail_values, outcomes

    def gae(self, buf_a: dict, tail_value: float):
        cfg = self.cfg
        rew = np.asarray(buf_a["rew"], dtype=np.float32)
        val = np.asarray(buf_a["val"], dtype=np.float32)
        done = np.asarray(buf_a["done"], dtype=np.float32)
        adv = np.zeros_like(rew)
        last = 0.0
        next_val = tail_value
        for t in range(len(rew) - 1, -1, -1):
            nonterminal = 1.0 - done[t]
            delta = rew[t] + cfg.gamma * next_val * nonterminal - val[t]
            last = delta + cfg.gamma * cfg.gae_lambda * nonterminal * last
            adv[t] = last
            next_val = val[t]
        return adv, adv + val

    def update(self, buf, tail_values):
        cfg = self.cfg
        for a in self.agents:
            data = buf[a]
            adv, ret = self.gae(data, tail_values[a])
            adv_t = torch.as_tensor((adv - adv.mean()) / (adv.std() + 1e-8))
            obs = torch.as_tensor(np.asarray(data["obs"]))
            joint = torch.as_tensor(np.asarray(data["joint"]))
            mask = torch.as_tensor(np.asarray(data["mask"]), dtype=torch.bool)
            act = torch.as_tensor(data["act"])
            old_logp = torch.as_tensor(data["logp"])
            ret_t = torch.as_tensor(ret)
            n = len(act)
            idx = np.arange(n)
            mb = max(1, n // cfg.minibatches)
            for _ in range(cfg.update_epochs):
                np.random.shuffle(idx)
                for start in range(0, n, mb):
                    sel = torch.as_tensor(idx[start : start + mb])
                    logits = masked_logits(self.actors[a](obs[sel]), mask[sel])
                    dist = torch.distributions.Categorical(logits=logits)
                    logp = dist.log_prob(act[sel])
                    ratio = torch.exp(logp - old_logp[sel])
                    surr1 = ratio * adv_t[sel]
                    surr2 = torch.clamp(ratio, 1 - cfg.clip, 1 + cfg.clip) * adv_t[sel]
                    policy_loss = -torch.min(surr1, surr2).mean()
                    value = self.critics[a](joint[sel]).squeeze(-1)
                    value_loss = ((value - ret_t[sel]) ** 2).mean()
                    entropy = dist.entropy().mean()
                    loss = policy_loss + cfg.value_coef * value_loss - cfg.entropy_coef * entropy
                    self.optimizer.zero_grad()
                    loss.backward()
                    nn.utils.clip_grad_norm_(
                        [p for g in self.optimizer.param_groups for p in g["params"]],
                        cfg.max_grad_norm,
                    )
                    self.optimizer.step()


def train(client: EnvClient, cfg: TrainConfig, eval_every: int | None = None, eval_episodes: int = 30):
    """Run one training arm; returns (learner, history).

    History rows are (env steps so far, mean rollout outcome, eval mean or
    None). `eval_every` controls greedy evaluation cadence in env steps.
    """
    learner = Learner(client, cfg)
    np.random.seed(cfg.seed)
    history = []
    episode_index = 0
    payload = client.reset(seed=cfg.seed, episode_index=0)
    steps = 0
    next_eval = eval_every or 0
    while steps < cfg.total_steps:
        payload, episode_index, buf, tail_values, outcomes = learner.collect(
            payload, cfg.seed, episode_index
        )
        steps += cfg.rollout_steps
        learner.update(buf, tail_values)
        eval_mean = None
        if eval_every and steps >= next_eval:
            eval_mean = evaluate(client, learner, episodes=eval_episodes, seed=cfg.seed + 500_000)
            next_eval += eval_every
            # evaluation consumed the live episode; start a fresh one
            episode_index += 1
            payload = client.reset(seed=cfg.seed, episode_index=episode_index)
        rollout_mean = float(np.mean(outcomes)) if outcomes else None
        history.append({"steps": steps, "rollout_outcome_mean": rollout_mean, "eval_mean": eval_mean})
    return learner, history


def evaluate(client: EnvClient, learner: Learner, episodes: int, seed: int) -> float:
    total = 0.0
    for i in range(episodes):
        payload = client.reset(seed=seed + i, episode_index=i)
        while not payload.terminal:
            actions, _, _ = learner.act(payload, greedy=True)
            payload = client.step(actions)
        total += OUTCOME_SCORE[payload.outcome]
    return total / episodes
