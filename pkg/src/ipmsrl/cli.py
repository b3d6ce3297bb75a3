"""Command-line entry point: run, sweep, replay, serve.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import harness, protocol, trace as trace_mod
from .agents import POLICY_NAMES
from .scenario import ScenarioError, load_scenario_file

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario", required=True, help="path to a scenario JSON file")
    parser.add_argument("--policy", default="heuristic", choices=POLICY_NAMES)
    parser.add_argument("--episodes", type=int, default=100)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--out", default=None, help="directory for report.csv/report.json")
    parser.add_argument("--save-traces", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ipmsrl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one configuration and report metrics")
    _add_common(run)

    sweep = sub.add_parser("sweep", help="run a config-key sweep")
    _add_common(sweep)
    sweep.add_argument("--key", required=True, help="dotted config path, e.g. alert_success_prob")
    sweep.add_argument("--values", required=True, help="comma-separated JSON values, e.g. 0,0.5,1")

    replay = sub.add_parser("replay", help="re-reduce a trace file and verify its footer")
    replay.add_argument("--trace", required=True)

    serve = sub.add_parser("serve", help="expose the environment over the step protocol")
    serve.add_argument("--scenario", required=True)
    serve.add_argument("--port", type=int, default=None, help="serve TCP on this port instead of stdio")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--idle-timeout", type=float, default=protocol.DEFAULT_IDLE_TIMEOUT)
    serve.add_argument("--max-sessions", type=int, default=None)
    return parser


def _cmd_run(args, sweep_key=None, sweep_values=()) -> int:
    spec = harness.ExperimentSpec(
        scenario_path=args.scenario,
        policy=args.policy,
        episodes=args.episodes,
        base_seed=args.seed,
        sweep_key=sweep_key,
        sweep_values=tuple(sweep_values),
        workers=args.workers,
        out_dir=args.out,
        save_traces=args.save_traces,
    )
    report = harness.run_experiment(spec)
    sys.stdout.write(report.to_csv())
    return EXIT_OK


def _cmd_replay(args) -> int:
    with open(args.trace, encoding="utf-8") as fh:
        records = trace_mod.from_jsonl(fh.read())
    final = trace_mod.replay(records)
    foot = trace_mod.footer(records)
    ok = final["outcome"] == foot["outcome"] and final["t"] == foot["length"]
    print(json.dumps({"verified": ok, "final_state": final}, indent=2, sort_keys=True))
    return EXIT_OK if ok else EXIT_RUNTIME


def _cmd_serve(args) -> int:
    config = load_scenario_file(args.scenario)
    if args.port is None:
        protocol.serve_stdio(config, idle_timeout=args.idle_timeout)
    else:
        protocol.serve_tcp(
            config, args.host, args.port, idle_timeout=args.idle_timeout, max_sessions=args.max_sessions
        )
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "sweep":
            values = [json.loads(v) for v in args.values.split(",")]
            return _cmd_run(args, sweep_key=args.key, sweep_values=values)
        if args.command == "replay":
            return _cmd_replay(args)
        if args.command == "serve":
            return _cmd_serve(args)
        raise AssertionError("unreachable")
    except (ScenarioError, FileNotFoundError, json.JSONDecodeError) as exc:
        print("configuration error: %s" % exc, file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print("runtime failure: %s" % exc, file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
