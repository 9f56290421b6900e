"""Reward terms combining per-service utilization with system response time.

All functions are pure. The per-service term pushes utilization into the
[eta_low, eta_high] band; the shared term is an affine penalty on the
priority-weighted sum of response times and is identical for every agent
at a tick.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable


@dataclass(frozen=True)
class RewardParams:
    eta_low: float = 30.0
    eta_high: float = 60.0
    alpha: float = 5.0
    beta: float = 0.5
    # Optional floor on the shared term; None keeps it unclipped. Intended
    # for training stability only, never for reported metrics.
    shared_floor: float | None = None

    def __post_init__(self) -> None:
        if not 0 < self.eta_low < self.eta_high <= 100:
            raise ValueError(
                f"need 0 < eta_low < eta_high <= 100, got ({self.eta_low}, {self.eta_high})"
            )
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not 0 < self.beta <= 1:
            raise ValueError(f"beta must be in (0, 1], got {self.beta}")


@dataclass(frozen=True)
class RewardBreakdown:
    rho: float
    omega: float
    r_shared: float
    r_total: float


def utilization_reward(eta: float, eta_prev: float, params: RewardParams) -> float:
    """Piecewise utilization term, in percentage points.

    Inside the band the reward grows with utilization; below it the sign of
    the change decides (rising is rewarded, falling penalized, both clamped
    to [-1, 1] at 10 points per unit); above the band it is 0.
    """
    if params.eta_low <= eta <= params.eta_high:
        return 1.0 + eta / (params.eta_high - params.eta_low)
    if eta < params.eta_low:
        delta = eta - eta_prev
        if delta > 0:
            return min(delta / 10.0, 1.0)
        return max(delta / 10.0, -1.0)
    return 0.0


def weighted_response_time(services: Iterable[tuple[int, float]]) -> float:
    """Sum of (1 + priority) * response_time over (priority, response) pairs."""
    return sum((1 + priority) * response for priority, response in services)


def shared_reward(omega: float, params: RewardParams) -> float:
    """System-wide term: 1 - alpha * (omega - 0.01), positive near zero response."""
    value = 1.0 - params.alpha * (omega - 0.01)
    if params.shared_floor is not None:
        value = max(value, params.shared_floor)
    return value


def total_reward(rho: float, r_shared: float, params: RewardParams) -> float:
    return params.beta * rho + r_shared


def breakdown(
    eta: float,
    eta_prev: float,
    omega: float,
    params: RewardParams,
) -> RewardBreakdown:
    """Full per-agent reward decomposition for one tick."""
    rho = utilization_reward(eta, eta_prev, params)
    r_s = shared_reward(omega, params)
    return RewardBreakdown(
        rho=rho,
        omega=omega,
        r_shared=r_s,
        r_total=total_reward(rho, r_s, params),
    )
