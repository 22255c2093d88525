"""Command-line entry point: ``ctsim run | experiment | compare``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .harness import (
    ConfigError,
    ScenarioConfig,
    emit_results,
    load_config,
    read_runs,
    run_episode,
    run_experiment,
    welch_t_test,
)
from .policies import PolicyKind

# Experiment-level keys accepted in a config file next to the scenario fields.
_SWEEP_KEYS = ("agent_counts", "seeds", "policies")
DEFAULT_AGENT_COUNTS = list(range(1, 9))
DEFAULT_SEEDS = list(range(30))
DEFAULT_POLICIES = [p.value for p in PolicyKind]


def parse_int_list(text: str) -> list[int]:
    """Parse ``"1,2,5-8"`` into ``[1, 2, 5, 6, 7, 8]``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        lo, sep, hi = part.partition("-")
        if sep:
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty list: {text!r}")
    return out


def _int_list(text: str) -> list[int]:
    try:
        return parse_int_list(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc


def _policy_list(text: str) -> list[str]:
    try:
        return [PolicyKind.parse(p).value for p in text.split(",") if p.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ctsim", description="Multi-agent continuous transportation simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--horizon", type=int, help="time steps per episode")

    run = sub.add_parser("run", help="run one episode and print its result as JSON")
    common(run)
    run.add_argument("--policy", type=_policy_list, help="OBP, GR_EO or RANDOM")
    run.add_argument("--agents", type=_int_list, help="number of transportation agents")
    run.add_argument("--seeds", type=_int_list, help="episode seed")
    run.add_argument("--series", action="store_true", help="include the per-tick delivered series")

    exp = sub.add_parser("experiment", help="factorial sweep over policies, agent counts and seeds")
    common(exp)
    exp.add_argument("--policy", type=_policy_list, help="comma-separated policies")
    exp.add_argument("--agents", type=_int_list, help="agent counts, e.g. 1-8 or 4,6,8")
    exp.add_argument("--seeds", type=_int_list, help="seeds, e.g. 0-29")
    exp.add_argument("--out", default="results.csv", help="per-episode CSV; summary goes to <stem>_summary.csv")
    exp.add_argument("--workers", type=int, help="episode processes (default: CPUs, capped by CT_SIM_THREADS)")

    cmp_ = sub.add_parser("compare", help="Welch t-test on per-seed rates from two result CSVs")
    cmp_.add_argument("a")
    cmp_.add_argument("b")
    cmp_.add_argument("--policy", type=_policy_list, help="policy filter: one for both files, or A,B")
    cmp_.add_argument("--agents", type=_int_list, help="agent-count filter")
    return parser


def _scenario(args, sweep: dict) -> ScenarioConfig:
    data = load_config(args.config) if args.config else {}
    for key in _SWEEP_KEYS:
        if key in data:
            sweep[key] = data.pop(key)
    cfg = ScenarioConfig.from_dict(data)
    if args.horizon is not None:
        cfg = replace(cfg, horizon=args.horizon)
    return cfg


def cmd_run(args) -> int:
    cfg = _scenario(args, {})
    if args.policy:
        cfg = replace(cfg, policy=PolicyKind(args.policy[0]))
    if args.agents:
        cfg = replace(cfg, n_agents=args.agents[0])
    if args.series:
        cfg = replace(cfg, record_series=True)
    seed = args.seeds[0] if args.seeds else cfg.seed
    print(run_episode(cfg, seed).to_json())
    return 0


def cmd_experiment(args) -> int:
    sweep = {}
    cfg = _scenario(args, sweep)
    policies = args.policy or sweep.get("policies") or DEFAULT_POLICIES
    agents = args.agents or sweep.get("agent_counts") or DEFAULT_AGENT_COUNTS
    seeds = args.seeds or sweep.get("seeds") or DEFAULT_SEEDS
    summary = run_experiment(cfg, agents, seeds, policies, workers=args.workers)
    runs, agg = emit_results(summary, args.out)
    for cell in summary.cells.values():
        print(f"{cell.policy:>7} agents={cell.agents:<3} mean_rate={cell.mean:.4f} std={cell.std:.4f} n={cell.n}")
    print(f"wrote {runs} and {agg}")
    return 0


def cmd_compare(args) -> int:
    pa = pb = None
    if args.policy:
        pa = args.policy[0]
        pb = args.policy[1] if len(args.policy) > 1 else pa

    def pick(path, policy):
        rows = read_runs(path)
        return [
            r["rate"]
            for r in rows
            if (policy is None or r["policy"] == policy) and (not args.agents or r["agents"] in args.agents)
        ]

    a, b = pick(args.a, pa), pick(args.b, pb)
    t, p = welch_t_test(a, b)
    print(json.dumps({"t": t, "p": p, "n_a": len(a), "n_b": len(b), "mean_a": sum(a) / len(a), "mean_b": sum(b) / len(b)}))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "experiment": cmd_experiment, "compare": cmd_compare}[args.command]
    try:
        return handler(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"ctsim {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
