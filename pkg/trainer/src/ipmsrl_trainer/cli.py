"""`ipmsrl-train`: train IPPO and/or MAPPO arms over the step protocol
and write a comparison report.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys

import numpy as np

from .client import EnvClient, packaged_scenario, random_rollout_score
from .ppo import config_diff, evaluate, make_config, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ipmsrl-train", description=__doc__)
    parser.add_argument("--scenario", default=packaged_scenario("micro"))
    parser.add_argument("--algo", default="both", choices=("ippo", "mappo", "both"))
    parser.add_argument("--total-steps", type=int, default=100_000)
    parser.add_argument("--seeds", type=int, default=5, help="number of training seeds per arm")
    parser.add_argument("--rollout-steps", type=int, default=256)
    parser.add_argument("--eval-episodes", type=int, default=200)
    parser.add_argument("--eval-every", type=int, default=None, help="greedy eval cadence in env steps")
    parser.add_argument("--baseline-episodes", type=int, default=300)
    parser.add_argument("--out", default=None, help="directory for report.json / report.csv")
    return parser


def run_arm(scenario: str, algo: str, args) -> dict:
    seed_results = []
    for seed in range(args.seeds):
        cfg = make_config(
            algo,
            total_steps=args.total_steps,
            rollout_steps=args.rollout_steps,
            seed=seed,
        )
        with EnvClient(scenario) as client:
            learner, history = train(client, cfg, eval_every=args.eval_every)
            final = evaluate(client, learner, episodes=args.eval_episodes, seed=900_000 + seed)
        seed_results.append({"seed": seed, "final_eval_mean": final, "history": history})
    finals = [r["final_eval_mean"] for r in seed_results]
    return {
        "algo": algo,
        "config": dataclasses.asdict(make_config(algo, total_steps=args.total_steps, rollout_steps=args.rollout_steps)),
        "outcome_mean": float(np.mean(finals)),
        "outcome_std": float(np.std(finals)),
        "per_seed": seed_results,
    }


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    algos = ("ippo", "mappo") if args.algo == "both" else (args.algo,)

    with EnvClient(args.scenario) as client:
        baseline = random_rollout_score(
            client, episodes=args.baseline_episodes, seed=10_000, rng=np.random.default_rng(0)
        )

    arms = [run_arm(args.scenario, algo, args) for algo in algos]

    report = {
        "scenario": args.scenario,
        "random_baseline_outcome_mean": baseline,
        "arms": arms,
    }
    if len(arms) == 2:
        diff = config_diff(
            make_config("ippo", total_steps=args.total_steps, rollout_steps=args.rollout_steps),
            make_config("mappo", total_steps=args.total_steps, rollout_steps=args.rollout_steps),
        )
        report["config_diff"] = diff
        means = {arm["algo"]: arm["outcome_mean"] for arm in arms}
        report["observed_direction"] = (
            "mappo >= ippo at this scale" if means["mappo"] >= means["ippo"] else "ippo > mappo at this scale"
        )
        report["note"] = (
            "Published full-scale result: the centralized-critic arm converged "
            "faster (outcome mean 1.0 after 800K steps vs 0.966 at 1M for "
            "independent critics). Desk-scale runs record the observed "
            "direction only; it is not a gated target."
        )

    text = json.dumps(report, indent=2)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "report.json"), "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        with open(os.path.join(args.out, "report.csv"), "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["algo", "outcome_mean", "outcome_std", "random_baseline", "seeds", "total_steps"])
            for arm in arms:
                writer.writerow(
                    [arm["algo"], "%.6f" % arm["outcome_mean"], "%.6f" % arm["outcome_std"],
                     "%.6f" % baseline, args.seeds, args.total_steps]
                )
    sys.stdout.write(text + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
