"""Normalized per-service observations with a fixed-depth FIFO history.

Seven variables describe a service's view of the cluster; each keeps the
last k values (slot 0 = most recent). Everything is scaled into [0, 1]:
millicore quantities by pool capacity, utilizations by 100 and priorities
by the configured maximum.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .cluster import Cluster, ClusterError

N_VARIABLES = 7


@dataclass(frozen=True)
class ObservationConfig:
    history_k: int = 5
    max_priority: int = 2

    def __post_init__(self) -> None:
        if self.history_k <= 0:
            raise ValueError(f"history_k must be positive, got {self.history_k}")
        if self.max_priority < 0:
            raise ValueError("max_priority must be non-negative")

    @property
    def dim(self) -> int:
        return N_VARIABLES * self.history_k


def snapshot(cluster: Cluster, service_id: str, config: ObservationConfig) -> np.ndarray:
    """Current normalized 7-variable view for one service.

    Variables: own limit, own usage, free pool, own utilization, mean
    utilization of the other services, own priority, mean priority of the
    other services. Means over an empty "others" set are 0.
    """
    state = cluster.get(service_id)
    capacity = cluster.config.capacity_mc
    others = [s for s in cluster.services.values() if s.id != service_id]
    if others:
        mean_eta_others = sum(o.utilization_pct for o in others) / len(others)
        mean_pri_others = sum(o.priority for o in others) / len(others)
    else:
        mean_eta_others = 0.0
        mean_pri_others = 0.0
    pri_scale = config.max_priority if config.max_priority > 0 else 1
    return np.array(
        [
            state.limit_mc / capacity,
            state.usage_mc / capacity,
            cluster.free_mc / capacity,
            state.utilization_pct / 100.0,
            mean_eta_others / 100.0,
            state.priority / pri_scale,
            mean_pri_others / pri_scale,
        ],
        dtype=np.float64,
    )


class ObservationBuffer:
    """Per-service FIFO of snapshots, owned by that service's agent."""

    def __init__(self, config: ObservationConfig) -> None:
        self.config = config
        self._slots: deque[np.ndarray] = deque(maxlen=config.history_k)

    def reset(self, snap: np.ndarray) -> None:
        """Warm-fill every history slot with the same snapshot."""
        self._slots.clear()
        for _ in range(self.config.history_k):
            self._slots.appendleft(snap.copy())

    def push(self, snap: np.ndarray) -> None:
        if not self._slots:
            self.reset(snap)
            return
        self._slots.appendleft(snap.copy())

    def matrix(self) -> np.ndarray:
        """(7, k) matrix; column j is the j-th most recent snapshot."""
        if not self._slots:
            raise ClusterError("observation buffer is empty; reset it first")
        return np.stack(tuple(self._slots), axis=1)

    def vector(self) -> np.ndarray:
        """Flat (7*k,) view, variable-major: all history of var 1, then var 2, ..."""
        return self.matrix().reshape(-1)


def build_observation(
    cluster: Cluster,
    service_id: str,
    buffer: ObservationBuffer,
    config: ObservationConfig,
) -> np.ndarray:
    """Push the current snapshot (evicting the oldest) and return the matrix."""
    buffer.push(snapshot(cluster, service_id, config))
    return buffer.matrix()
