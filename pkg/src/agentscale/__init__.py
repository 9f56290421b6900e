"""Deterministic autoscaling sandbox: a shared-CPU-pool simulator with
in-place resizing, learned scaling policies (discrete value-based and
continuous policy-gradient) plus a threshold baseline, and a benchmark
harness with seeded, reproducible experiments."""

from .cluster import Cluster, ClusterConfig, ClusterError, MicroserviceState, ServiceSpec, TraceError
from .dqn import DqnAgent, DqnConfig, ReplayBuffer, Transition
from .engine import (
    ConfigError,
    Engine,
    EngineAbort,
    EngineConfig,
    TickRecord,
    evaluate_scenario,
    train_policy,
)
from .harness import config_for_scenario, run_experiment
from .heuristic import HeuristicConfig, HeuristicPolicy
from .kpi import KpiReport, ServiceKpi, compute_report
from .nn import Adam, DenseNet, OptimizerError, soft_update
from .observation import ObservationBuffer, ObservationConfig, build_observation, snapshot
from .ppo import PpoAgent, PpoConfig, RolloutRecord
from .rewards import (
    RewardBreakdown,
    RewardParams,
    shared_reward,
    total_reward,
    utilization_reward,
    weighted_response_time,
)
from .scenarios import Scenario, ScenarioError, builtin_scenarios, get_scenario

__version__ = "0.1.0"

__all__ = [
    "Adam",
    "Cluster",
    "ClusterConfig",
    "ClusterError",
    "ConfigError",
    "DenseNet",
    "DqnAgent",
    "DqnConfig",
    "Engine",
    "EngineAbort",
    "EngineConfig",
    "HeuristicConfig",
    "HeuristicPolicy",
    "KpiReport",
    "MicroserviceState",
    "ObservationBuffer",
    "ObservationConfig",
    "OptimizerError",
    "PpoAgent",
    "PpoConfig",
    "ReplayBuffer",
    "RewardBreakdown",
    "RewardParams",
    "RolloutRecord",
    "Scenario",
    "ScenarioError",
    "ServiceKpi",
    "ServiceSpec",
    "TickRecord",
    "TraceError",
    "Transition",
    "build_observation",
    "builtin_scenarios",
    "compute_report",
    "config_for_scenario",
    "evaluate_scenario",
    "get_scenario",
    "run_experiment",
    "shared_reward",
    "snapshot",
    "soft_update",
    "total_reward",
    "train_policy",
    "utilization_reward",
    "weighted_response_time",
    "__version__",
]
