"""Benchmark scenarios: phased request rates, priorities and lifecycle events.

A scenario fixes the cluster calibration, the services (with priorities),
piecewise-constant request rates over a tick horizon, and optional add and
remove events. Scenarios round-trip through a plain text format (key-value
header plus per-phase tables) documented in the README.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

from .cluster import ClusterConfig, ServiceSpec

PRIORITY_LOW = 0
PRIORITY_MEDIUM = 1
PRIORITY_HIGH = 2

FILE_FORMAT = "agentscale-scenario/1"


class ScenarioError(ValueError):
    """Malformed scenario definition or file."""


@dataclass(frozen=True)
class Phase:
    start_tick: int
    end_tick: int  # inclusive
    rates: tuple[float, ...]  # requests/second, one per scenario service


@dataclass(frozen=True)
class ScalingEvent:
    tick: int
    kind: str  # "add" | "remove"
    service_id: str


@dataclass(frozen=True)
class Scenario:
    name: str
    cluster: ClusterConfig
    services: tuple[ServiceSpec, ...]
    phases: tuple[Phase, ...]
    events: tuple[ScalingEvent, ...] = ()
    horizon_ticks: int = 0
    max_priority: int = 2
    # Initial sizing: an even split of initial_fraction * capacity across the
    # initially present services, jittered per iteration seed.
    initial_fraction: float = 0.5
    initial_jitter: float = 0.2

    def __post_init__(self) -> None:
        ids = [s.id for s in self.services]
        if len(set(ids)) != len(ids):
            raise ScenarioError("duplicate service ids")
        if self.horizon_ticks <= 0:
            raise ScenarioError("horizon_ticks must be positive")
        if not self.phases:
            raise ScenarioError("scenario needs at least one phase")
        expected_start = 0
        for phase in self.phases:
            if phase.start_tick != expected_start or phase.end_tick < phase.start_tick:
                raise ScenarioError("phases must tile the horizon contiguously from tick 0")
            if len(phase.rates) != len(self.services):
                raise ScenarioError("each phase needs one rate per service")
            if any(r < 0 for r in phase.rates):
                raise ScenarioError("request rates must be non-negative")
            expected_start = phase.end_tick + 1
        if expected_start != self.horizon_ticks:
            raise ScenarioError(
                f"phases cover ticks 0..{expected_start - 1} but horizon is {self.horizon_ticks}"
            )
        for event in self.events:
            if event.kind not in ("add", "remove"):
                raise ScenarioError(f"unknown event kind {event.kind!r}")
            if event.service_id not in ids:
                raise ScenarioError(f"event references unknown service {event.service_id!r}")
            if not 0 <= event.tick < self.horizon_ticks:
                raise ScenarioError("event tick outside horizon")
        if not 0 < self.initial_fraction <= 1:
            raise ScenarioError("initial_fraction must be in (0, 1]")
        if not 0 <= self.initial_jitter < 1:
            raise ScenarioError("initial_jitter must be in [0, 1)")

    def service_ids(self) -> tuple[str, ...]:
        return tuple(s.id for s in self.services)

    def initial_service_ids(self) -> tuple[str, ...]:
        added_later = {e.service_id for e in self.events if e.kind == "add"}
        return tuple(s.id for s in self.services if s.id not in added_later)

    def rate(self, service_id: str, tick: int) -> float:
        idx = self.service_ids().index(service_id)
        for phase in self.phases:
            if phase.start_tick <= tick <= phase.end_tick:
                return phase.rates[idx]
        raise ScenarioError(f"tick {tick} outside scenario horizon")

    def events_at(self, tick: int) -> tuple[ScalingEvent, ...]:
        return tuple(e for e in self.events if e.tick == tick)

    def with_priorities(self, priorities: dict[str, int]) -> "Scenario":
        services = tuple(
            replace(s, priority=priorities.get(s.id, s.priority)) for s in self.services
        )
        return replace(self, services=services)


def dynamic_load_scenario() -> Scenario:
    """Three services sharing 100 requests/second with two load shifts.

    Shares per phase: 25/8.5/66.5, then 25/72/3, then 47/7/46 percent.
    """
    total = 100.0
    shares = (
        ((0, 7), (25.0, 8.5, 66.5)),
        ((8, 14), (25.0, 72.0, 3.0)),
        ((15, 21), (47.0, 7.0, 46.0)),
    )
    phases = tuple(
        Phase(start, end, tuple(total * s / 100.0 for s in row))
        for (start, end), row in shares
    )
    return Scenario(
        name="dynamic-load",
        cluster=ClusterConfig(capacity_mc=1200, min_limit_mc=25),
        services=(
            ServiceSpec("svc1", priority=PRIORITY_MEDIUM),
            ServiceSpec("svc2", priority=PRIORITY_MEDIUM),
            ServiceSpec("svc3", priority=PRIORITY_MEDIUM),
        ),
        phases=phases,
        horizon_ticks=22,
    )


def priority_scenario(order: tuple[int, int, int], label: str) -> Scenario:
    base = dynamic_load_scenario()
    ids = base.service_ids()
    scenario = base.with_priorities(dict(zip(ids, order)))
    return replace(scenario, name=f"priority-{label}")


PRIORITY_PERMUTATIONS: dict[str, tuple[int, int, int]] = {
    # label letters are the per-service priority assignment, in service order
    "lhm": (PRIORITY_LOW, PRIORITY_HIGH, PRIORITY_MEDIUM),
    "mlh": (PRIORITY_MEDIUM, PRIORITY_LOW, PRIORITY_HIGH),
    "hml": (PRIORITY_HIGH, PRIORITY_MEDIUM, PRIORITY_LOW),
}


def scalability_scenario() -> Scenario:
    """Two services joined by a third and fourth under a full pool; the first
    service is later removed. Rates are absolute requests/second."""
    phases = (
        Phase(0, 15, (30.0, 40.0, 0.0, 0.0)),
        Phase(16, 30, (30.0, 40.0, 50.0, 0.0)),
        Phase(31, 45, (30.0, 40.0, 50.0, 50.0)),
        Phase(46, 60, (0.0, 40.0, 50.0, 50.0)),
    )
    return Scenario(
        name="scalability",
        cluster=ClusterConfig(capacity_mc=1500, min_limit_mc=25),
        services=(
            ServiceSpec("svc1", priority=PRIORITY_MEDIUM),
            ServiceSpec("svc2", priority=PRIORITY_MEDIUM),
            ServiceSpec("svc3", priority=PRIORITY_MEDIUM),
            ServiceSpec("svc4", priority=PRIORITY_MEDIUM),
        ),
        phases=phases,
        events=(
            ScalingEvent(16, "add", "svc3"),
            ScalingEvent(31, "add", "svc4"),
            ScalingEvent(46, "remove", "svc1"),
        ),
        horizon_ticks=61,
    )


def builtin_scenarios() -> dict[str, Scenario]:
    out = {
        "dynamic-load": dynamic_load_scenario(),
        "scalability": scalability_scenario(),
    }
    for label, order in PRIORITY_PERMUTATIONS.items():
        scenario = priority_scenario(order, label)
        out[scenario.name] = scenario
    return out


def get_scenario(name: str) -> Scenario:
    scenarios = builtin_scenarios()
    if name not in scenarios:
        known = ", ".join(sorted(scenarios))
        raise ScenarioError(f"unknown scenario {name!r}; built-ins: {known}")
    return scenarios[name]


# --- text file round trip ---------------------------------------------------


def write_scenario(path: str | Path, scenario: Scenario) -> None:
    lines = [
        f"format = {FILE_FORMAT}",
        f"name = {scenario.name}",
        f"capacity_mc = {scenario.cluster.capacity_mc}",
        f"min_limit_mc = {scenario.cluster.min_limit_mc}",
        f"tick_seconds = {scenario.cluster.tick_seconds!r}",
        f"horizon_ticks = {scenario.horizon_ticks}",
        f"max_priority = {scenario.max_priority}",
        f"initial_fraction = {scenario.initial_fraction!r}",
        f"initial_jitter = {scenario.initial_jitter!r}",
        "",
        "[services]",
        "# id  priority  work_per_request_mcs",
    ]
    for spec in scenario.services:
        lines.append(f"{spec.id}  {spec.priority}  {spec.work_per_request_mcs!r}")
    lines += ["", "[phases]", "# start_tick  end_tick  rate per service (requests/second)"]
    for phase in scenario.phases:
        rates = "  ".join(repr(r) for r in phase.rates)
        lines.append(f"{phase.start_tick}  {phase.end_tick}  {rates}")
    if scenario.events:
        lines += ["", "[events]", "# tick  add|remove  service_id"]
        for event in scenario.events:
            lines.append(f"{event.tick}  {event.kind}  {event.service_id}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _content_lines(text: str) -> list[str]:
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(line)
    return out


def read_scenario(path: str | Path) -> Scenario:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario file {path}: {exc}") from exc

    header: dict[str, str] = {}
    sections: dict[str, list[str]] = {"services": [], "phases": [], "events": []}
    current: str | None = None
    for line in _content_lines(text):
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            if current not in sections:
                raise ScenarioError(f"unknown section [{current}]")
            continue
        if current is None:
            if "=" not in line:
                raise ScenarioError(f"expected 'key = value' before sections, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            header[key] = value
        else:
            sections[current].append(line)

    if header.get("format") != FILE_FORMAT:
        raise ScenarioError(f"missing or unsupported format line (want {FILE_FORMAT})")

    def _header(key: str, cast, default=None):
        if key not in header:
            if default is not None:
                return default
            raise ScenarioError(f"missing header key {key!r}")
        try:
            return cast(header[key])
        except ValueError as exc:
            raise ScenarioError(f"bad value for {key!r}: {header[key]!r}") from exc

    services = []
    for line in sections["services"]:
        parts = line.split()
        if len(parts) != 3:
            raise ScenarioError(f"services row needs 3 columns, got {line!r}")
        try:
            services.append(
                ServiceSpec(parts[0], priority=int(parts[1]), work_per_request_mcs=float(parts[2]))
            )
        except ValueError as exc:
            raise ScenarioError(f"bad services row {line!r}") from exc

    phases = []
    for line in sections["phases"]:
        parts = line.split()
        if len(parts) != 2 + len(services):
            raise ScenarioError(
                f"phases row needs start, end and {len(services)} rates, got {line!r}"
            )
        try:
            rates = tuple(0.0 if p == "-" else float(p) for p in parts[2:])
            phases.append(Phase(int(parts[0]), int(parts[1]), rates))
        except ValueError as exc:
            raise ScenarioError(f"bad phases row {line!r}") from exc

    events = []
    for line in sections["events"]:
        parts = line.split()
        if len(parts) != 3:
            raise ScenarioError(f"events row needs 3 columns, got {line!r}")
        try:
            events.append(ScalingEvent(int(parts[0]), parts[1], parts[2]))
        except ValueError as exc:
            raise ScenarioError(f"bad events row {line!r}") from exc

    try:
        cluster = ClusterConfig(
            capacity_mc=_header("capacity_mc", int),
            min_limit_mc=_header("min_limit_mc", int),
            tick_seconds=_header("tick_seconds", float, 1.0),
        )
        return Scenario(
            name=_header("name", str),
            cluster=cluster,
            services=tuple(services),
            phases=tuple(phases),
            events=tuple(events),
            horizon_ticks=_header("horizon_ticks", int),
            max_priority=_header("max_priority", int, 2),
            initial_fraction=_header("initial_fraction", float, 0.5),
            initial_jitter=_header("initial_jitter", float, 0.2),
        )
    except ScenarioError:
        raise
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc
