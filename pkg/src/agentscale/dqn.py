"""Per-service discrete scaling agent: epsilon-greedy Q-learning.

Three actions (shrink / hold / grow by a fixed millicore step), experience
replay, a soft-updated target network, and one optimizer step per learn
call on the mean squared Bellman error.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .nn import Adam, DenseNet, soft_update

N_ACTIONS = 3  # 0: decrease, 1: hold, 2: increase


@dataclass(frozen=True)
class DqnConfig:
    obs_dim: int
    hidden_dims: tuple[int, ...] = (64, 128, 64)
    learning_rate: float = 1e-4
    gamma: float = 0.99
    tau: float = 0.005
    buffer_capacity: int = 1000
    batch_size: int = 128
    epsilon_start: float = 1.0
    epsilon_decay: float = 0.95
    epsilon_min: float = 0.05
    step_mc: int = 25

    def __post_init__(self) -> None:
        if self.obs_dim <= 0:
            raise ValueError("obs_dim must be positive")
        if self.buffer_capacity < self.batch_size:
            raise ValueError("buffer_capacity must be >= batch_size")
        if not 0 <= self.epsilon_min <= self.epsilon_start <= 1:
            raise ValueError("need 0 <= epsilon_min <= epsilon_start <= 1")
        if not 0 < self.epsilon_decay <= 1:
            raise ValueError("epsilon_decay must be in (0, 1]")
        if not 0 <= self.gamma <= 1:
            raise ValueError("gamma must be in [0, 1]")
        if not 0 <= self.tau <= 1:
            raise ValueError("tau must be in [0, 1]")
        if self.step_mc <= 0:
            raise ValueError("step_mc must be positive")


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray


class ReplayBuffer:
    """Bounded FIFO of transitions with uniform sampling."""

    def __init__(self, capacity: int) -> None:
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: deque[Transition] = deque(maxlen=capacity)

    def __len__(self) -> int:
        return len(self._items)

    def append(self, transition: Transition) -> None:
        self._items.append(transition)

    def sample(self, rng: np.random.Generator, n: int) -> list[Transition]:
        """Uniform sample without replacement within the batch."""
        if n > len(self._items):
            raise ValueError(f"cannot sample {n} from buffer of {len(self._items)}")
        idx = rng.choice(len(self._items), size=n, replace=False)
        return [self._items[i] for i in idx]

    def clear(self) -> None:
        self._items.clear()


class DqnAgent:
    def __init__(self, config: DqnConfig, rng: np.random.Generator) -> None:
        self.config = config
        self.rng = rng
        dims = (config.obs_dim, *config.hidden_dims, N_ACTIONS)
        self.q_net = DenseNet.initialize(dims, "linear", rng)
        self.target_net = self.q_net.copy()
        self.optimizer = Adam(self.q_net, config.learning_rate)
        self.buffer = ReplayBuffer(config.buffer_capacity)
        self.epsilon = config.epsilon_start

    def select_action(self, observation: np.ndarray, explore: bool = True) -> int:
        """Epsilon-greedy; greedy ties resolve to the lowest action index."""
        if explore and self.rng.random() < self.epsilon:
            return int(self.rng.integers(N_ACTIONS))
        q = self.q_net.forward(observation)
        return int(np.argmax(q))

    def action_to_delta(self, action: int) -> int:
        if action not in (0, 1, 2):
            raise ValueError(f"invalid action index {action}")
        return (action - 1) * self.config.step_mc

    def store(self, transition: Transition) -> None:
        self.buffer.append(transition)

    def learn(self) -> float | None:
        """One optimizer step on a sampled batch; None while the buffer is short.

        Targets come from the target network (r + gamma * max Q'); the target
        is then pulled toward the online weights with coefficient tau.
        """
        batch_size = self.config.batch_size
        if len(self.buffer) < batch_size:
            return None
        batch = self.buffer.sample(self.rng, batch_size)
        states = np.stack([t.state for t in batch])
        actions = np.array([t.action for t in batch], dtype=np.intp)
        rewards = np.array([t.reward for t in batch], dtype=np.float64)
        next_states = np.stack([t.next_state for t in batch])

        q_all, cache = self.q_net.forward_cached(states)
        q_taken = q_all[np.arange(batch_size), actions]
        targets = rewards + self.config.gamma * self.target_net.forward(next_states).max(axis=1)
        residual = q_taken - targets
        loss = float(np.mean(residual**2))

        grad_out = np.zeros_like(q_all)
        grad_out[np.arange(batch_size), actions] = 2.0 * residual / batch_size
        self.optimizer.step(self.q_net, self.q_net.backward(cache, grad_out))
        soft_update(self.target_net, self.q_net, self.config.tau)
        return loss

    def decay_epsilon(self, episode_index: int) -> float:
        if episode_index < 0:
            raise ValueError("episode_index must be non-negative")
        self.epsilon = max(
            self.config.epsilon_min,
            self.config.epsilon_start * self.config.epsilon_decay**episode_index,
        )
        return self.epsilon

    def to_dict(self) -> dict:
        return {
            "kind": "dqn",
            "epsilon": self.epsilon,
            "q_net": self.q_net.to_dict(),
            "target_net": self.target_net.to_dict(),
            "optimizer": self.optimizer.to_dict(),
        }

    def load_dict(self, doc: dict) -> None:
        if doc.get("kind") != "dqn":
            raise ValueError("checkpoint is not a discrete-agent document")
        self.q_net = DenseNet.from_dict(doc["q_net"])
        self.target_net = DenseNet.from_dict(doc["target_net"])
        self.optimizer = Adam(self.q_net, self.config.learning_rate)
        self.optimizer.load_dict(doc["optimizer"], self.q_net)
        self.epsilon = float(doc["epsilon"])
