"""Experiment driver: seeded multi-iteration evaluations and aggregation.

Iterations are independent (fresh engine per seed) and may fan out across
worker processes; the reduce is ordered by iteration index, so results do
not depend on worker count.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .engine import (
    EngineConfig,
    TickRecord,
    evaluate_scenario,
    load_checkpoints,
    rows_to_csv,
)
from .kpi import KpiReport, compute_report, save_report
from .observation import ObservationConfig
from .scenarios import Scenario


DEFAULT_EPISODES = {"heuristic": 1, "discrete": 150, "continuous": 300}


def config_for_scenario(policy: str, scenario: Scenario, **overrides) -> EngineConfig:
    """Engine configuration matching a scenario's calibration.

    Training defaults: every scenario service participates (a per-episode
    count range covering initial..all services when the scenario has add
    events), and the per-service load cap is sized so peak aggregate demand
    roughly equals the pool.
    """
    observation = ObservationConfig(
        history_k=overrides.pop("history_k", 5),
        max_priority=scenario.max_priority,
    )
    n_all = len(scenario.services)
    n_initial = len(scenario.initial_service_ids())
    has_adds = any(e.kind == "add" for e in scenario.events)
    mean_work = sum(s.work_per_request_mcs for s in scenario.services) / n_all
    lambda_max = overrides.pop(
        "train_lambda_max", scenario.cluster.capacity_mc / (n_all * mean_work)
    )
    episodes = overrides.pop("episodes", None)
    if episodes is None:
        episodes = DEFAULT_EPISODES[policy]
    return EngineConfig(
        policy=policy,
        cluster=scenario.cluster,
        observation=observation,
        train_services=scenario.services,
        train_count_min=n_initial if has_adds else 0,
        train_count_max=n_all if has_adds else 0,
        train_lambda_max=lambda_max,
        episodes=episodes,
        initial_fraction=overrides.pop("initial_fraction", scenario.initial_fraction),
        initial_jitter=overrides.pop("initial_jitter", scenario.initial_jitter),
        **overrides,
    )


def _one_iteration(args: tuple) -> list[TickRecord]:
    config, scenario, seed, iteration, checkpoints = args
    return evaluate_scenario(config, scenario, seed, iteration, checkpoints)


def run_experiment(
    config: EngineConfig,
    scenario: Scenario,
    seed: int,
    iterations: int = 20,
    checkpoint_dir: str | Path | None = None,
    outdir: str | Path | None = None,
    workers: int = 1,
) -> tuple[KpiReport, list[list[TickRecord]]]:
    """Evaluate a policy over `iterations` seeded runs and aggregate KPIs.

    Writes `kpi.json` and one `run_###.csv` per iteration when `outdir` is
    given. Returns the report plus the raw per-iteration rows.
    """
    if iterations <= 0:
        raise ValueError("iterations must be positive")
    checkpoints = None
    if config.policy != "heuristic":
        if checkpoint_dir is None:
            raise ValueError(f"policy {config.policy!r} needs --checkpoints")
        checkpoints = load_checkpoints(checkpoint_dir)

    jobs = [(config, scenario, seed, i, checkpoints) for i in range(iterations)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows_by_iteration = list(pool.map(_one_iteration, jobs))
    else:
        rows_by_iteration = [_one_iteration(job) for job in jobs]

    report = compute_report(scenario.name, config.policy, rows_by_iteration)
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        for i, rows in enumerate(rows_by_iteration):
            (outdir / f"run_{i:03d}.csv").write_text(rows_to_csv(rows), encoding="utf-8")
        save_report(outdir / "kpi.json", report)
    return report, rows_by_iteration
