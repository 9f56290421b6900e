"""Multi-agent orchestration: the observe / act / resize / step / reward loop.

One engine instance drives one cluster. Every tick follows a strict phase
order: all agents observe the pre-action state, all choose, deltas apply
sequentially with clamping, the simulator advances, rewards are computed
once per tick (the shared term is identical for every agent), transitions
are stored and learning hooks fire. Training runs seeded synthetic loads
over episodes; evaluation replays a scenario with frozen policies.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .cluster import Cluster, ClusterConfig, ClusterError, ServiceSpec
from .dqn import DqnAgent, DqnConfig, Transition
from .heuristic import HeuristicConfig, HeuristicPolicy
from .observation import ObservationBuffer, ObservationConfig, build_observation, snapshot
from .ppo import PpoAgent, PpoConfig, RolloutRecord
from .rewards import RewardParams, breakdown, weighted_response_time

POLICIES = ("heuristic", "discrete", "continuous")

MANIFEST_FORMAT = "agentscale-checkpoints"
MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"


class ConfigError(ValueError):
    """Inconsistent engine configuration or checkpoint mismatch."""


class EngineAbort(RuntimeError):
    """A run produced non-finite values or hit an unrecoverable state."""


@dataclass(frozen=True)
class EngineConfig:
    policy: str
    cluster: ClusterConfig
    observation: ObservationConfig = ObservationConfig()
    reward: RewardParams = RewardParams()
    heuristic: HeuristicConfig = HeuristicConfig()
    dqn: DqnConfig | None = None
    ppo: PpoConfig | None = None
    episodes: int = 150
    ticks_per_episode: int = 64
    agent_order: str = "ascending"  # or "shuffled" (seeded)
    # Training curriculum: which services exist, how many participate per
    # episode (0 = all), load intensity cap and priority randomization.
    train_services: tuple[ServiceSpec, ...] = ()
    train_count_min: int = 0
    train_count_max: int = 0
    train_lambda_max: float = 50.0
    train_priority_random: bool = True
    # Floor on the shared reward during training only; keeps value targets
    # bounded when a starved service's backlog explodes.
    train_shared_floor: float | None = -10.0
    initial_fraction: float = 0.5
    initial_jitter: float = 0.2

    def __post_init__(self) -> None:
        if self.policy not in POLICIES:
            raise ConfigError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        if self.episodes <= 0 or self.ticks_per_episode <= 0:
            raise ConfigError("episodes and ticks_per_episode must be positive")
        if self.agent_order not in ("ascending", "shuffled"):
            raise ConfigError(f"unknown agent_order {self.agent_order!r}")
        if self.dqn is not None and self.dqn.obs_dim != self.observation.dim:
            raise ConfigError("dqn obs_dim does not match observation dim")
        if self.ppo is not None and self.ppo.obs_dim != self.observation.dim:
            raise ConfigError("ppo obs_dim does not match observation dim")
        if self.train_count_min < 0 or self.train_count_max < self.train_count_min:
            raise ConfigError("bad train_count range")

    def dqn_config(self) -> DqnConfig:
        return self.dqn if self.dqn is not None else DqnConfig(obs_dim=self.observation.dim)

    def ppo_config(self) -> PpoConfig:
        return self.ppo if self.ppo is not None else PpoConfig(obs_dim=self.observation.dim)


def arch_fingerprint(config: EngineConfig) -> dict:
    """The architecture-relevant subset of a config; must match a checkpoint."""
    doc: dict = {
        "policy": config.policy,
        "capacity_mc": config.cluster.capacity_mc,
        "min_limit_mc": config.cluster.min_limit_mc,
        "history_k": config.observation.history_k,
        "max_priority": config.observation.max_priority,
    }
    if config.policy == "discrete":
        dqn = config.dqn_config()
        doc["hidden_dims"] = list(dqn.hidden_dims)
        doc["step_mc"] = dqn.step_mc
    elif config.policy == "continuous":
        ppo = config.ppo_config()
        doc["actor_hidden"] = list(ppo.actor_hidden)
        doc["critic_hidden"] = list(ppo.critic_hidden)
        doc["delta_max_mc"] = ppo.delta_max_mc
    return doc


def config_hash(config: EngineConfig) -> str:
    payload = json.dumps(arch_fingerprint(config), sort_keys=True).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True)
class TickRecord:
    iteration: int
    episode: int
    tick: int
    service: str
    priority: int
    lambda_rps: float
    limit_mc: int
    usage_mc: float
    eta_pct: float
    sigma_s: float
    action: str
    applied_delta_mc: int
    rho: float
    omega_s: float
    r_shared: float
    r_total: float


CSV_HEADER = (
    "iteration,episode,tick,service,priority,lambda_rps,limit_mc,usage_mc,"
    "eta_pct,sigma_s,action,applied_delta_mc,rho,omega_s,r_shared,r_total"
)


@dataclass(frozen=True)
class _Decision:
    label: str
    delta: int
    discrete: int = 0
    continuous: float = 0.0
    sample: float = 0.0
    log_prob: float = 0.0


def rows_to_csv(rows: Iterable[TickRecord]) -> str:
    lines = [CSV_HEADER]
    for r in rows:
        lines.append(
            f"{r.iteration},{r.episode},{r.tick},{r.service},{r.priority},"
            f"{r.lambda_rps!r},{r.limit_mc},{r.usage_mc!r},{r.eta_pct!r},"
            f"{r.sigma_s!r},{r.action},{r.applied_delta_mc},{r.rho!r},"
            f"{r.omega_s!r},{r.r_shared!r},{r.r_total!r}"
        )
    return "\n".join(lines) + "\n"


def allocate_initial_limits(
    rng: np.random.Generator,
    cluster: ClusterConfig,
    service_ids: Iterable[str],
    fraction: float,
    jitter: float,
) -> dict[str, int]:
    """Even split of fraction * capacity, jittered, floored, never oversubscribed."""
    ids = list(service_ids)
    floor = cluster.min_limit_mc
    if floor * len(ids) > cluster.capacity_mc:
        raise ClusterError("capacity cannot hold the minimum limit of every service")
    base = cluster.capacity_mc * fraction / len(ids)
    limits = {
        sid: max(floor, int(round(base * (1.0 + rng.uniform(-jitter, jitter))))) for sid in ids
    }
    excess = sum(limits.values()) - cluster.capacity_mc
    if excess > 0:
        for sid in sorted(ids, key=lambda s: (-limits[s], s)):
            take = min(limits[sid] - floor, excess)
            limits[sid] -= take
            excess -= take
            if excess == 0:
                break
    return limits


def synthetic_trace(
    rng: np.random.Generator,
    service_ids: Iterable[str],
    ticks: int,
    lambda_max: float,
) -> dict[str, np.ndarray]:
    """Piecewise-constant random rates: segments of 3..10 ticks, each with a
    rate drawn uniformly from [0, lambda_max)."""
    trace: dict[str, np.ndarray] = {}
    for sid in service_ids:
        rates = np.empty(ticks, dtype=np.float64)
        t = 0
        while t < ticks:
            seg = int(rng.integers(3, 11))
            rates[t : t + seg] = rng.uniform(0.0, lambda_max)
            t += seg
        trace[sid] = rates
    return trace


class Engine:
    """Owns one cluster plus one agent (or heuristic state) per service."""

    def __init__(self, config: EngineConfig, seed: int | np.random.SeedSequence) -> None:
        self.config = config
        root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        trace_ss, init_ss, order_ss, self._agent_ss = root.spawn(4)
        self.trace_rng = np.random.default_rng(trace_ss)
        self.init_rng = np.random.default_rng(init_ss)
        self.order_rng = np.random.default_rng(order_ss)

        self.cluster: Cluster | None = None
        self.agents: dict[str, DqnAgent | PpoAgent] = {}
        self.heuristic = HeuristicPolicy(config.heuristic)
        self.buffers: dict[str, ObservationBuffer] = {}
        self.prev_eta: dict[str, float] = {}
        self.tick_in_episode = 0

    # -- lifecycle ---------------------------------------------------------

    def _make_agent(self) -> DqnAgent | PpoAgent:
        rng = np.random.default_rng(self._agent_ss.spawn(1)[0])
        if self.config.policy == "discrete":
            return DqnAgent(self.config.dqn_config(), rng)
        if self.config.policy == "continuous":
            return PpoAgent(self.config.ppo_config(), rng)
        raise ConfigError("heuristic policy has no agents")

    def ensure_agent(self, service_id: str) -> None:
        if self.config.policy != "heuristic" and service_id not in self.agents:
            self.agents[service_id] = self._make_agent()

    def reset_episode(
        self,
        specs: Iterable[ServiceSpec],
        initial_limits: dict[str, int] | None = None,
    ) -> None:
        """Fresh cluster for an episode; agents persist across episodes."""
        specs = list(specs)
        self.cluster = Cluster(self.config.cluster, specs)
        if initial_limits:
            for spec in specs:
                target = initial_limits.get(spec.id)
                if target is not None:
                    self.cluster.resize_in_place(spec.id, target - self.cluster.get(spec.id).limit_mc)
        self.heuristic.reset()
        self.tick_in_episode = 0
        self.buffers = {}
        self.prev_eta = {}
        for spec in specs:
            self.ensure_agent(spec.id)
            buf = ObservationBuffer(self.config.observation)
            buf.reset(snapshot(self.cluster, spec.id, self.config.observation))
            self.buffers[spec.id] = buf
            self.prev_eta[spec.id] = self.cluster.get(spec.id).utilization_pct

    def attach_agent(self, spec: ServiceSpec, warm_start: dict | None = None) -> str:
        """Add a service mid-run, reclaiming capacity proportionally if the
        pool cannot cover the floor limit."""
        if self.cluster is None:
            raise EngineAbort("attach_agent before reset_episode")
        if spec.id in self.cluster.services:
            raise ClusterError(f"service id {spec.id!r} already active")
        self._reclaim_for_floor()
        self.cluster.add_service(spec)
        if self.config.policy != "heuristic":
            agent = self._make_agent()
            if warm_start is not None:
                agent.load_dict(warm_start)
            self.agents[spec.id] = agent
        buf = ObservationBuffer(self.config.observation)
        buf.reset(snapshot(self.cluster, spec.id, self.config.observation))
        self.buffers[spec.id] = buf
        self.prev_eta[spec.id] = 0.0
        return spec.id

    def detach_agent(self, service_id: str) -> int:
        """Remove a service; its limit returns to the pool and its agent (and
        any stored transitions) are dropped."""
        if self.cluster is None:
            raise EngineAbort("detach_agent before reset_episode")
        released = self.cluster.remove_service(service_id)
        self.agents.pop(service_id, None)
        self.buffers.pop(service_id, None)
        self.prev_eta.pop(service_id, None)
        return released

    def _reclaim_for_floor(self) -> None:
        """Shave active limits proportionally to headroom until one floor fits."""
        assert self.cluster is not None
        floor = self.config.cluster.min_limit_mc
        need = floor - self.cluster.free_mc
        if need <= 0:
            return
        headroom = {
            sid: state.limit_mc - floor for sid, state in self.cluster.services.items()
        }
        total = sum(headroom.values())
        if total < need:
            raise ClusterError(
                f"cannot reclaim {need} mc for a new service; only {total} mc above floors"
            )
        shaves = {sid: need * h // total for sid, h in headroom.items()}
        remainder = need - sum(shaves.values())
        for sid in sorted(headroom, key=lambda s: (-(need * headroom[s] % total), s)):
            if remainder == 0:
                break
            if shaves[sid] < headroom[sid]:
                shaves[sid] += 1
                remainder -= 1
        for sid, shave in shaves.items():
            if shave:
                self.cluster.resize_in_place(sid, -shave)

    # -- per-tick loop -----------------------------------------------------

    def _agent_order(self, ids: list[str]) -> list[str]:
        ids = sorted(ids)
        if self.config.agent_order == "shuffled":
            self.order_rng.shuffle(ids)
        return ids

    def run_tick(
        self,
        workload: dict[str, float],
        *,
        explore: bool,
        learn: bool,
        iteration: int = 0,
        episode: int = 0,
    ) -> list[TickRecord]:
        if self.cluster is None:
            raise EngineAbort("run_tick before reset_episode")
        cluster = self.cluster
        order = self._agent_order(list(cluster.services))
        tick = self.tick_in_episode

        # (1) observations from the pre-action state (pushed at the end of the
        # previous tick, or warm-filled at reset/attach)
        obs_pre = {sid: self.buffers[sid].vector() for sid in order}

        # (2) action selection
        decisions: dict[str, _Decision] = {}
        for sid in order:
            state = cluster.get(sid)
            if self.config.policy == "heuristic":
                delta = self.heuristic.decide(state, tick)
                decisions[sid] = _Decision(label=str(delta), delta=delta)
            elif self.config.policy == "discrete":
                agent = self.agents[sid]
                action = agent.select_action(obs_pre[sid], explore=explore)
                decisions[sid] = _Decision(
                    label=str(action), delta=agent.action_to_delta(action), discrete=action
                )
            else:
                agent = self.agents[sid]
                action, raw, log_prob = agent.sample_action(obs_pre[sid], explore=explore)
                decisions[sid] = _Decision(
                    label=repr(action),
                    delta=agent.action_to_delta(action),
                    continuous=action,
                    sample=raw,
                    log_prob=log_prob,
                )

        # (3) apply deltas sequentially with clamping
        applied = {sid: cluster.resize_in_place(sid, decisions[sid].delta) for sid in order}

        # (4) simulator transition
        cluster.step(workload)

        # (5) rewards, shared term computed once
        omega = weighted_response_time(
            (s.priority, s.response_s) for s in cluster.services.values()
        )
        params = self.config.reward
        per_agent = {}
        for sid in order:
            state = cluster.get(sid)
            rb = breakdown(state.utilization_pct, self.prev_eta[sid], omega, params)
            if not (
                np.isfinite(rb.r_total) and np.isfinite(rb.omega) and np.isfinite(state.response_s)
            ):
                raise EngineAbort(
                    f"non-finite value at episode {episode} tick {tick} service {sid}: {rb}"
                )
            per_agent[sid] = rb
            self.prev_eta[sid] = state.utilization_pct

        # (6) next observations, transition storage, (7) learning hooks
        records: list[TickRecord] = []
        for sid in order:
            obs_post = build_observation(
                cluster, sid, self.buffers[sid], self.config.observation
            ).reshape(-1)
            decision = decisions[sid]
            if learn and self.config.policy == "discrete":
                agent = self.agents[sid]
                agent.store(
                    Transition(obs_pre[sid], decision.discrete, per_agent[sid].r_total, obs_post)
                )
                agent.learn()
            elif learn and self.config.policy == "continuous":
                agent = self.agents[sid]
                agent.store(
                    RolloutRecord(
                        state=obs_pre[sid],
                        action=decision.continuous,
                        sample=decision.sample,
                        log_prob=decision.log_prob,
                        reward=per_agent[sid].r_total,
                        next_state=obs_post,
                    )
                )
                agent.update()

        for sid in sorted(order):
            state = cluster.get(sid)
            rb = per_agent[sid]
            records.append(
                TickRecord(
                    iteration=iteration,
                    episode=episode,
                    tick=tick,
                    service=sid,
                    priority=state.priority,
                    lambda_rps=float(workload.get(sid, 0.0)),
                    limit_mc=state.limit_mc,
                    usage_mc=state.usage_mc,
                    eta_pct=state.utilization_pct,
                    sigma_s=state.response_s,
                    action=decisions[sid].label,
                    applied_delta_mc=applied[sid],
                    rho=rb.rho,
                    omega_s=rb.omega,
                    r_shared=rb.r_shared,
                    r_total=rb.r_total,
                )
            )
        self.tick_in_episode += 1
        return records


# -- training ----------------------------------------------------------------


def train_policy(
    config: EngineConfig,
    seed: int,
    checkpoint_dir: str | Path | None = None,
    collect_logs: bool = False,
) -> tuple[dict, list[TickRecord]]:
    """Run the episodic training loop and save per-agent checkpoints.

    Episodes draw a random subset of the configured services (when a count
    range is set), random priorities, seeded initial limits and a fresh
    synthetic trace; exploration decays per episode index.
    """
    if not config.train_services:
        raise ConfigError("train_services must not be empty")
    if config.policy != "heuristic":
        reward = replace(config.reward, shared_floor=config.train_shared_floor)
        config = replace(config, reward=reward)
    engine = Engine(config, seed)
    all_specs = {s.id: s for s in config.train_services}
    all_ids = sorted(all_specs)
    count_min = config.train_count_min or len(all_ids)
    count_max = config.train_count_max or len(all_ids)
    max_pri = config.observation.max_priority
    rows: list[TickRecord] = []

    for sid in all_ids:
        engine.ensure_agent(sid)

    for episode in range(config.episodes):
        if count_min == count_max == len(all_ids):
            chosen = list(all_ids)
        else:
            n = int(engine.init_rng.integers(count_min, count_max + 1))
            chosen = sorted(engine.init_rng.choice(all_ids, size=n, replace=False).tolist())
        specs = []
        for sid in chosen:
            spec = all_specs[sid]
            if config.train_priority_random:
                spec = replace(spec, priority=int(engine.init_rng.integers(0, max_pri + 1)))
            specs.append(spec)
        limits = allocate_initial_limits(
            engine.init_rng,
            config.cluster,
            chosen,
            config.initial_fraction,
            config.initial_jitter,
        )
        engine.reset_episode(specs, limits)
        for sid in chosen:
            agent = engine.agents.get(sid)
            if isinstance(agent, DqnAgent):
                agent.decay_epsilon(episode)
            elif isinstance(agent, PpoAgent):
                agent.decay_stddev(episode)
        trace = synthetic_trace(
            engine.trace_rng, chosen, config.ticks_per_episode, config.train_lambda_max
        )
        for t in range(config.ticks_per_episode):
            workload = {sid: float(trace[sid][t]) for sid in chosen}
            records = engine.run_tick(
                workload, explore=True, learn=True, iteration=0, episode=episode
            )
            if collect_logs:
                rows.extend(records)
        for sid in chosen:
            agent = engine.agents.get(sid)
            if isinstance(agent, PpoAgent):
                agent.mark_episode_end()

    manifest = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "policy": config.policy,
        "seed": seed,
        "config_hash": config_hash(config),
        "train_service_ids": all_ids,
        "slots": [f"slot_{i:03d}.json" for i in range(len(all_ids))]
        if config.policy != "heuristic"
        else [],
    }
    if checkpoint_dir is not None:
        directory = Path(checkpoint_dir)
        directory.mkdir(parents=True, exist_ok=True)
        for i, sid in enumerate(all_ids):
            if config.policy == "heuristic":
                break
            doc = engine.agents[sid].to_dict()
            doc["config_hash"] = manifest["config_hash"]
            (directory / manifest["slots"][i]).write_text(
                json.dumps(doc, sort_keys=True), encoding="utf-8"
            )
        (directory / MANIFEST_NAME).write_text(
            json.dumps(manifest, sort_keys=True, indent=1), encoding="utf-8"
        )
    return manifest, rows


def load_checkpoints(directory: str | Path) -> tuple[dict, list[dict]]:
    directory = Path(directory)
    manifest_path = directory / MANIFEST_NAME
    if not manifest_path.is_file():
        raise ConfigError(f"no {MANIFEST_NAME} in {directory}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("format") != MANIFEST_FORMAT or manifest.get("version") != MANIFEST_VERSION:
        raise ConfigError("unsupported checkpoint manifest")
    slots = [
        json.loads((directory / name).read_text(encoding="utf-8")) for name in manifest["slots"]
    ]
    return manifest, slots


# -- evaluation ----------------------------------------------------------------


def evaluate_scenario(
    config: EngineConfig,
    scenario,
    seed: int,
    iteration: int = 0,
    checkpoints: tuple[dict, list[dict]] | None = None,
) -> list[TickRecord]:
    """One deterministic scenario replay with frozen policies.

    RNG streams derive from (seed, iteration); learning policies require a
    checkpoint set whose config hash matches this config. Services added by
    scenario events warm-start from their slot (index modulo slot count).
    """
    if config.policy != "heuristic":
        if checkpoints is None:
            raise ConfigError(f"policy {config.policy!r} needs trained checkpoints")
        manifest, slots = checkpoints
        if manifest["policy"] != config.policy:
            raise ConfigError(
                f"checkpoints are for policy {manifest['policy']!r}, not {config.policy!r}"
            )
        if manifest["config_hash"] != config_hash(config):
            raise ConfigError("checkpoint config hash does not match this configuration")
        if not slots:
            raise ConfigError("checkpoint set has no agents")
    else:
        slots = []

    engine = Engine(config, np.random.SeedSequence([seed, iteration]))
    slot_of = {sid: i % len(slots) if slots else 0 for i, sid in enumerate(scenario.service_ids())}
    initial_ids = scenario.initial_service_ids()
    specs = {s.id: s for s in scenario.services}
    limits = allocate_initial_limits(
        engine.init_rng,
        config.cluster,
        initial_ids,
        scenario.initial_fraction,
        scenario.initial_jitter,
    )
    engine.reset_episode([specs[sid] for sid in initial_ids], limits)
    for sid in initial_ids:
        if slots:
            engine.agents[sid].load_dict(slots[slot_of[sid]])

    rows: list[TickRecord] = []
    for tick in range(scenario.horizon_ticks):
        for event in scenario.events_at(tick):
            if event.kind == "add":
                warm = slots[slot_of[event.service_id]] if slots else None
                engine.attach_agent(specs[event.service_id], warm_start=warm)
            else:
                engine.detach_agent(event.service_id)
        workload = {sid: scenario.rate(sid, tick) for sid in engine.cluster.services}
        rows.extend(
            engine.run_tick(workload, explore=False, learn=False, iteration=iteration, episode=0)
        )
    return rows
