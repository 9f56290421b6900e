"""Tick-driven simulation of a shared CPU pool hosting resizable microservices.

Each service is a fluid queue: work arrives as rate * cost, drains at the
CPU limit, and the leftover becomes backlog. Limits are adjusted in place
(no restart, backlog preserved). Work is accounted on an integer ledger in
millicore-milliseconds so conservation checks are exact; user-facing
quantities are millicores, millicore-seconds and seconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

MCMS_PER_MCS = 1000


class ClusterError(ValueError):
    """Invalid cluster operation: unknown/duplicate id or infeasible request."""


class TraceError(ValueError):
    """Workload slice is inconsistent with the cluster (bad id or rate)."""


@dataclass(frozen=True)
class ClusterConfig:
    capacity_mc: int
    min_limit_mc: int = 25
    tick_seconds: float = 1.0

    def __post_init__(self) -> None:
        if self.capacity_mc <= 0:
            raise ClusterError(f"capacity_mc must be positive, got {self.capacity_mc}")
        if self.min_limit_mc <= 0:
            raise ClusterError(f"min_limit_mc must be positive, got {self.min_limit_mc}")
        if self.min_limit_mc > self.capacity_mc:
            raise ClusterError("min_limit_mc cannot exceed capacity_mc")
        if self.tick_seconds <= 0:
            raise ClusterError("tick_seconds must be positive")

    @property
    def tick_ms(self) -> int:
        return round(self.tick_seconds * 1000)


@dataclass(frozen=True)
class ServiceSpec:
    id: str
    priority: int = 0
    work_per_request_mcs: float = 8.0

    def __post_init__(self) -> None:
        if not self.id:
            raise ClusterError("service id must be non-empty")
        if self.priority < 0:
            raise ClusterError(f"priority must be non-negative, got {self.priority}")
        if self.work_per_request_mcs <= 0:
            raise ClusterError("work_per_request_mcs must be positive")


@dataclass
class MicroserviceState:
    """Live per-service state. `backlog_mcms` is the integer work ledger."""

    id: str
    limit_mc: int
    priority: int = 0
    work_per_request_mcs: float = 8.0
    usage_mc: float = 0.0
    backlog_mcms: int = 0
    response_s: float = 0.0
    active: bool = True
    total_arrived_mcms: int = 0
    total_processed_mcms: int = 0
    work_mcms: int = field(init=False)

    def __post_init__(self) -> None:
        self.work_mcms = round(self.work_per_request_mcs * MCMS_PER_MCS)
        if self.response_s == 0.0:
            self.response_s = self.work_per_request_mcs / self.limit_mc

    @property
    def backlog_mcs(self) -> float:
        return self.backlog_mcms / MCMS_PER_MCS

    @property
    def utilization_pct(self) -> float:
        return 100.0 * self.usage_mc / self.limit_mc


class Cluster:
    """A finite pool of CPU millicores shared by resizable services."""

    def __init__(self, config: ClusterConfig, specs: Iterable[ServiceSpec] = ()) -> None:
        self.config = config
        self.services: dict[str, MicroserviceState] = {}
        for spec in specs:
            self.add_service(spec)

    @property
    def allocated_mc(self) -> int:
        return sum(s.limit_mc for s in self.services.values())

    @property
    def free_mc(self) -> int:
        return self.config.capacity_mc - self.allocated_mc

    def active_services(self) -> Iterator[MicroserviceState]:
        return iter(self.services.values())

    def get(self, service_id: str) -> MicroserviceState:
        state = self.services.get(service_id)
        if state is None:
            raise ClusterError(f"unknown or inactive service id {service_id!r}")
        return state

    def add_service(self, spec: ServiceSpec) -> MicroserviceState:
        """Add a service at the floor limit. The caller must ensure free pool."""
        if spec.id in self.services:
            raise ClusterError(f"duplicate service id {spec.id!r}")
        floor = self.config.min_limit_mc
        if self.free_mc < floor:
            raise ClusterError(
                f"free pool {self.free_mc} mc cannot host a new service "
                f"(floor {floor} mc); reclaim capacity first"
            )
        state = MicroserviceState(
            id=spec.id,
            limit_mc=floor,
            priority=spec.priority,
            work_per_request_mcs=spec.work_per_request_mcs,
        )
        self.services[spec.id] = state
        return state

    def remove_service(self, service_id: str) -> int:
        """Remove a service; its limit returns to the pool, backlog is discarded."""
        state = self.get(service_id)
        del self.services[service_id]
        state.active = False
        return state.limit_mc

    def resize_in_place(self, service_id: str, delta_mc: int) -> int:
        """Resize a live service without touching its backlog or usage.

        The new limit is clamped to [min_limit, limit + free pool]; returns
        the delta actually applied.
        """
        state = self.get(service_id)
        delta = int(delta_mc)
        if delta != delta_mc:
            raise ClusterError(f"delta_mc must be an integer, got {delta_mc!r}")
        new_limit = state.limit_mc + delta
        new_limit = min(new_limit, state.limit_mc + self.free_mc)
        new_limit = max(new_limit, self.config.min_limit_mc)
        applied = new_limit - state.limit_mc
        state.limit_mc = new_limit
        return applied

    def step(self, workload: Mapping[str, float]) -> None:
        """Advance one tick: work arrives per `workload` (requests/second).

        Per service with arriving work A and capacity C = limit * tick:
        processed = min(backlog + A, C), the rest stays queued. The response
        estimate is the time a fresh request would need to clear the queue.
        """
        unknown = set(workload) - set(self.services)
        if unknown:
            raise TraceError(f"workload references unknown service ids {sorted(unknown)}")
        tick_ms = self.config.tick_ms
        tick_s = self.config.tick_seconds
        for state in self.services.values():
            rate = float(workload.get(state.id, 0.0))
            if rate < 0:
                raise TraceError(f"negative request rate {rate} for {state.id!r}")
            arrived = round(rate * state.work_mcms * tick_s)
            pending = state.backlog_mcms + arrived
            capacity = state.limit_mc * tick_ms
            processed = min(pending, capacity)
            state.backlog_mcms = pending - processed
            state.usage_mc = processed / tick_ms
            state.response_s = (
                state.backlog_mcms / MCMS_PER_MCS + state.work_per_request_mcs
            ) / state.limit_mc
            state.total_arrived_mcms += arrived
            state.total_processed_mcms += processed
