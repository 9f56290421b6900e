"""Threshold baseline: fixed-step scaling on utilization band violations."""

from __future__ import annotations

from dataclasses import dataclass

from .cluster import MicroserviceState


@dataclass(frozen=True)
class HeuristicConfig:
    upper_threshold: float = 60.0
    lower_threshold: float = 30.0
    step_mc: int = 50
    cooldown_ticks: int = 0

    def __post_init__(self) -> None:
        if not self.lower_threshold < self.upper_threshold:
            raise ValueError("lower_threshold must be below upper_threshold")
        if self.step_mc <= 0:
            raise ValueError("step_mc must be positive")
        if self.cooldown_ticks < 0:
            raise ValueError("cooldown_ticks must be non-negative")


class HeuristicPolicy:
    """Per-service threshold rule with an optional cooldown between changes.

    Grow by one step above the upper utilization threshold, shrink below the
    lower one, otherwise hold. Deltas are clamped downstream by the cluster,
    so a shrink request at the floor simply applies as zero.
    """

    def __init__(self, config: HeuristicConfig) -> None:
        self.config = config
        self._last_change: dict[str, int] = {}

    def reset(self) -> None:
        self._last_change.clear()

    def decide(self, state: MicroserviceState, tick: int) -> int:
        eta = state.utilization_pct
        if eta > self.config.upper_threshold:
            delta = self.config.step_mc
        elif eta < self.config.lower_threshold:
            delta = -self.config.step_mc
        else:
            return 0
        last = self._last_change.get(state.id)
        if last is not None and tick - last < self.config.cooldown_ticks:
            return 0
        self._last_change[state.id] = tick
        return delta
