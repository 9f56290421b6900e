"""Per-service continuous scaling agent: clipped-surrogate policy gradient.

A Gaussian actor with tanh-bounded mean and fixed (decaying) exploration
stddev emits actions in [-1, 1] that scale to millicore deltas; a critic
regresses discounted returns. Updates run full-batch for a fixed number of
epochs once the rollout buffer reaches its threshold, then the buffer is
emptied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .nn import Adam, DenseNet

# Bound on log-ratio before exponentiation. Ratios this far out are always
# on the clipped (zero-gradient) branch, so the bound only avoids overflow.
LOG_RATIO_BOUND = 60.0


@dataclass(frozen=True)
class PpoConfig:
    obs_dim: int
    actor_hidden: tuple[int, ...] = (64, 128, 128, 64)
    critic_hidden: tuple[int, ...] = (64, 128, 128, 64)
    actor_lr: float = 3e-4
    critic_lr: float = 1e-3
    gamma: float = 0.99
    clip_epsilon: float = 0.2
    entropy_coef: float = 0.01
    update_epochs: int = 10
    batch_threshold: int = 600
    stddev_start: float = 0.5
    stddev_decay: float = 0.95
    stddev_min: float = 0.05
    delta_max_mc: int = 100

    def __post_init__(self) -> None:
        if self.obs_dim <= 0:
            raise ValueError("obs_dim must be positive")
        if not 0 < self.clip_epsilon < 1:
            raise ValueError("clip_epsilon must be in (0, 1)")
        if self.update_epochs <= 0 or self.batch_threshold <= 0:
            raise ValueError("update_epochs and batch_threshold must be positive")
        if not 0 < self.stddev_min <= self.stddev_start:
            raise ValueError("need 0 < stddev_min <= stddev_start")
        if not 0 < self.stddev_decay <= 1:
            raise ValueError("stddev_decay must be in (0, 1]")
        if self.delta_max_mc <= 0:
            raise ValueError("delta_max_mc must be positive")


@dataclass
class RolloutRecord:
    state: np.ndarray
    action: float  # clamped to [-1, 1], as applied
    sample: float  # pre-clamp Gaussian draw; likelihoods are evaluated here
    log_prob: float
    reward: float
    next_state: np.ndarray
    episode_end: bool = field(default=False)


def gaussian_log_prob(x: np.ndarray, mean: np.ndarray, stddev: float) -> np.ndarray:
    z = (np.asarray(x) - np.asarray(mean)) / stddev
    return -0.5 * z * z - math.log(stddev) - 0.5 * math.log(2.0 * math.pi)


def gaussian_entropy(stddev: float) -> float:
    return 0.5 * math.log(2.0 * math.pi * math.e * stddev * stddev)


def clipped_surrogate(
    ratio: np.ndarray, advantage: np.ndarray, clip_epsilon: float
) -> np.ndarray:
    """Per-sample min(ratio*A, clip(ratio, 1-eps, 1+eps)*A)."""
    ratio = np.asarray(ratio, dtype=np.float64)
    advantage = np.asarray(advantage, dtype=np.float64)
    clipped = np.clip(ratio, 1.0 - clip_epsilon, 1.0 + clip_epsilon)
    return np.minimum(ratio * advantage, clipped * advantage)


def compute_returns(records: list[RolloutRecord], gamma: float) -> np.ndarray:
    """Discounted return-to-go, resetting at episode-end marks.

    The carry starts at zero, so the tail of the buffer (a rollout boundary)
    bootstraps with 0.
    """
    returns = np.empty(len(records), dtype=np.float64)
    carry = 0.0
    for i in reversed(range(len(records))):
        rec = records[i]
        if rec.episode_end:
            carry = 0.0
        carry = rec.reward + gamma * carry
        returns[i] = carry
    return returns


def compute_advantages(
    records: list[RolloutRecord], critic: DenseNet, gamma: float
) -> tuple[np.ndarray, np.ndarray]:
    """(returns, raw advantages R - V(s)) for every record."""
    if not records:
        raise ValueError("empty rollout buffer")
    returns = compute_returns(records, gamma)
    states = np.stack([r.state for r in records])
    values = critic.forward(states)[:, 0]
    return returns, returns - values


def normalize_advantages(advantages: np.ndarray) -> np.ndarray:
    """Zero-mean / unit-variance across the buffer (tiny epsilon for flat sets)."""
    adv = np.asarray(advantages, dtype=np.float64)
    return (adv - adv.mean()) / (adv.std() + 1e-8)


class PpoAgent:
    def __init__(self, config: PpoConfig, rng: np.random.Generator) -> None:
        self.config = config
        self.rng = rng
        self.actor = DenseNet.initialize((config.obs_dim, *config.actor_hidden, 1), "tanh", rng)
        self.critic = DenseNet.initialize(
            (config.obs_dim, *config.critic_hidden, 1), "linear", rng
        )
        self.actor_opt = Adam(self.actor, config.actor_lr)
        self.critic_opt = Adam(self.critic, config.critic_lr)
        self.records: list[RolloutRecord] = []
        self.stddev = config.stddev_start

    def sample_action(
        self, observation: np.ndarray, explore: bool = True
    ) -> tuple[float, float, float]:
        """Draw an action; returns (clamped action, raw sample, log-probability).

        With exploration off the actor mean is returned directly (it is
        already bounded by the tanh head).
        """
        mean = float(self.actor.forward(observation)[0])
        if explore:
            raw = mean + self.stddev * float(self.rng.standard_normal())
        else:
            raw = mean
        action = min(1.0, max(-1.0, raw))
        log_prob = float(gaussian_log_prob(raw, mean, self.stddev))
        return action, raw, log_prob

    def action_to_delta(self, action: float) -> int:
        return round(action * self.config.delta_max_mc)

    def store(self, record: RolloutRecord) -> None:
        self.records.append(record)

    def mark_episode_end(self) -> None:
        if self.records:
            self.records[-1].episode_end = True

    def ready(self) -> bool:
        return len(self.records) >= self.config.batch_threshold

    def update(self) -> tuple[float, float] | None:
        """K epochs of full-batch actor/critic steps; empties the buffer.

        Returns (actor loss, critic loss) from the last epoch, or None when
        the buffer has not reached the update threshold yet.
        """
        if not self.ready():
            return None
        cfg = self.config
        states = np.stack([r.state for r in self.records])
        samples = np.array([r.sample for r in self.records], dtype=np.float64)
        log_old = np.array([r.log_prob for r in self.records], dtype=np.float64)
        n = len(self.records)

        returns, raw_adv = compute_advantages(self.records, self.critic, cfg.gamma)
        adv = normalize_advantages(raw_adv)
        entropy = gaussian_entropy(self.stddev)

        actor_loss = critic_loss = math.nan
        for _ in range(cfg.update_epochs):
            mean_out, cache = self.actor.forward_cached(states)
            mean = mean_out[:, 0]
            log_new = gaussian_log_prob(samples, mean, self.stddev)
            ratio = np.exp(np.clip(log_new - log_old, -LOG_RATIO_BOUND, LOG_RATIO_BOUND))
            surr_plain = ratio * adv
            surr_clip = np.clip(ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon) * adv
            objective = float(np.mean(np.minimum(surr_plain, surr_clip)))
            actor_loss = -(objective + cfg.entropy_coef * entropy)

            # Gradient only flows through the unclipped branch of the min.
            active = surr_plain <= surr_clip
            dobj_dmean = (
                np.where(active, ratio * adv, 0.0) * (samples - mean) / (self.stddev**2) / n
            )
            self.actor_opt.step(self.actor, self.actor.backward(cache, -dobj_dmean[:, None]))

            value_out, vcache = self.critic.forward_cached(states)
            values = value_out[:, 0]
            critic_loss = float(np.mean((values - returns) ** 2))
            dloss_dv = 2.0 * (values - returns) / n
            self.critic_opt.step(self.critic, self.critic.backward(vcache, dloss_dv[:, None]))

        self.records.clear()
        return actor_loss, critic_loss

    def decay_stddev(self, episode_index: int) -> float:
        if episode_index < 0:
            raise ValueError("episode_index must be non-negative")
        self.stddev = max(
            self.config.stddev_min,
            self.config.stddev_start * self.config.stddev_decay**episode_index,
        )
        return self.stddev

    def to_dict(self) -> dict:
        return {
            "kind": "ppo",
            "stddev": self.stddev,
            "actor": self.actor.to_dict(),
            "critic": self.critic.to_dict(),
            "actor_opt": self.actor_opt.to_dict(),
            "critic_opt": self.critic_opt.to_dict(),
        }

    def load_dict(self, doc: dict) -> None:
        if doc.get("kind") != "ppo":
            raise ValueError("checkpoint is not a continuous-agent document")
        self.actor = DenseNet.from_dict(doc["actor"])
        self.critic = DenseNet.from_dict(doc["critic"])
        self.actor_opt = Adam(self.actor, self.config.actor_lr)
        self.actor_opt.load_dict(doc["actor_opt"], self.actor)
        self.critic_opt = Adam(self.critic, self.config.critic_lr)
        self.critic_opt.load_dict(doc["critic_opt"], self.critic)
        self.stddev = float(doc["stddev"])
        self.records = []
