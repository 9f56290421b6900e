"""Command-line interface: train, eval, scenario, report, compare.

Exit codes: 0 on success, 2 for configuration problems (bad flags, files,
mismatched inputs), 3 for runtime aborts (non-finite values, simulation
errors).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .cluster import ClusterError, TraceError
from .engine import ConfigError, EngineAbort, train_policy
from .harness import config_for_scenario, run_experiment
from .kpi import ReportError, comparison_table, load_report
from .nn import OptimizerError
from .plots import emit_comparison
from .scenarios import ScenarioError, builtin_scenarios, get_scenario, read_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _load_scenario(args: argparse.Namespace):
    if args.scenario_file:
        return read_scenario(args.scenario_file)
    return get_scenario(args.scenario)


def _add_scenario_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scenario", default="dynamic-load", help="built-in scenario name")
    parser.add_argument(
        "--scenario-file", default=None, help="scenario file (overrides --scenario)"
    )


def _add_common_overrides(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--episodes", type=int, default=None, help="training episodes")
    parser.add_argument("--ticks", type=int, default=None, help="ticks per training episode")
    parser.add_argument("--history-k", type=int, default=None, help="observation history depth")


def _overrides(args: argparse.Namespace) -> dict:
    out: dict = {}
    if getattr(args, "episodes", None) is not None:
        out["episodes"] = args.episodes
    if getattr(args, "ticks", None) is not None:
        out["ticks_per_episode"] = args.ticks
    if getattr(args, "history_k", None) is not None:
        out["history_k"] = args.history_k
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agentscale",
        description="Autoscaling simulator: train and benchmark scaling policies.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a policy's agents on synthetic load")
    p_train.add_argument("--policy", required=True, choices=("discrete", "continuous"))
    p_train.add_argument("--seed", type=int, required=True)
    p_train.add_argument("--out", required=True, help="checkpoint output directory")
    _add_scenario_flags(p_train)
    _add_common_overrides(p_train)

    p_eval = sub.add_parser("eval", help="evaluate a policy on a scenario")
    p_eval.add_argument(
        "--policy", required=True, choices=("heuristic", "discrete", "continuous")
    )
    p_eval.add_argument("--seed", type=int, required=True)
    p_eval.add_argument("--iterations", type=int, default=20)
    p_eval.add_argument("--checkpoints", default=None, help="checkpoint directory")
    p_eval.add_argument("--out", required=True, help="results output directory")
    p_eval.add_argument("--workers", type=int, default=1)
    _add_scenario_flags(p_eval)
    _add_common_overrides(p_eval)

    p_scenario = sub.add_parser("scenario", help="inspect scenarios")
    scen_sub = p_scenario.add_subparsers(dest="scenario_command", required=True)
    scen_sub.add_parser("list", help="list built-in scenarios")

    p_report = sub.add_parser("report", help="print a KPI report")
    p_report.add_argument("reports", nargs="+", help="kpi.json files")

    p_compare = sub.add_parser("compare", help="compare KPI reports and emit plots")
    p_compare.add_argument("reports", nargs="+", help="kpi.json files (same scenario)")
    p_compare.add_argument("--out", default=None, help="directory for plot files")

    return parser


def _cmd_train(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args)
    config = config_for_scenario(args.policy, scenario, **_overrides(args))
    manifest, _ = train_policy(config, seed=args.seed, checkpoint_dir=args.out)
    print(f"trained {args.policy} on {scenario.name}: {len(manifest['slots'])} agents -> {args.out}")
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    scenario = _load_scenario(args)
    config = config_for_scenario(args.policy, scenario, **_overrides(args))
    report, _ = run_experiment(
        config,
        scenario,
        seed=args.seed,
        iterations=args.iterations,
        checkpoint_dir=args.checkpoints,
        outdir=args.out,
        workers=args.workers,
    )
    print(comparison_table([report]))
    print(f"results written to {args.out}")
    return EXIT_OK


def _cmd_scenario(args: argparse.Namespace) -> int:
    if args.scenario_command == "list":
        for name, scenario in sorted(builtin_scenarios().items()):
            services = ", ".join(
                f"{s.id}(p{s.priority})" for s in scenario.services
            )
            print(
                f"{name:<16} horizon={scenario.horizon_ticks:<4} "
                f"capacity={scenario.cluster.capacity_mc}mc services: {services}"
            )
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    reports = [load_report(path) for path in args.reports]
    print(comparison_table(reports))
    return EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    reports = [load_report(path) for path in args.reports]
    print(comparison_table(reports))
    if args.out:
        created = emit_comparison(reports, args.out)
        for path in created:
            print(f"wrote {path}")
    return EXIT_OK


COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "scenario": _cmd_scenario,
    "report": _cmd_report,
    "compare": _cmd_compare,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (EngineAbort, ClusterError, TraceError, OptimizerError) as exc:
        # ClusterError/TraceError are ValueErrors too, so runtime classes go first.
        print(f"runtime abort: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ScenarioError, ConfigError, ReportError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
