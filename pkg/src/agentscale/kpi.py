"""KPIs over evaluation logs: violation rate, response time, resource churn.

A violation is a tick whose response estimate strictly exceeds the
threshold (default 250 ms). Resource delta is the summed absolute change
of a service's limit over a run, whatever caused the change. Per-service
numbers are averaged across iterations.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .engine import TickRecord

VIOLATION_THRESHOLD_S = 0.25


class ReportError(ValueError):
    """Reports cannot be combined (different scenarios) or are malformed."""


@dataclass(frozen=True)
class ServiceKpi:
    violation_pct: float
    mean_response_s: float
    resource_delta_mc: float
    violation_pct_std: float = 0.0
    mean_response_s_std: float = 0.0
    resource_delta_mc_std: float = 0.0


@dataclass(frozen=True)
class KpiReport:
    scenario: str
    policy: str
    iterations: int
    per_service: dict[str, ServiceKpi]
    aggregate: ServiceKpi
    # Mean over iterations of sigma and eta per (service, tick); drives plots.
    timeseries: dict[str, dict[str, list[float]]]


def _per_iteration_kpis(
    rows: Sequence[TickRecord], threshold_s: float
) -> dict[str, tuple[float, float, float]]:
    by_service: dict[str, list[TickRecord]] = {}
    for row in rows:
        by_service.setdefault(row.service, []).append(row)
    out: dict[str, tuple[float, float, float]] = {}
    for sid, recs in by_service.items():
        recs.sort(key=lambda r: r.tick)
        violations = sum(1 for r in recs if r.sigma_s > threshold_s)
        mean_response = sum(r.sigma_s for r in recs) / len(recs)
        delta = sum(
            abs(b.limit_mc - a.limit_mc) for a, b in zip(recs, recs[1:])
        )
        out[sid] = (100.0 * violations / len(recs), mean_response, float(delta))
    return out


def _mean_std(values: Sequence[float]) -> tuple[float, float]:
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / len(values)
    return mean, var**0.5


def compute_report(
    scenario_name: str,
    policy: str,
    rows_by_iteration: Sequence[Sequence[TickRecord]],
    threshold_s: float = VIOLATION_THRESHOLD_S,
) -> KpiReport:
    if not rows_by_iteration:
        raise ReportError("no iterations to aggregate")
    per_iter = [_per_iteration_kpis(rows, threshold_s) for rows in rows_by_iteration]
    service_ids = sorted({sid for kpis in per_iter for sid in kpis})

    per_service: dict[str, ServiceKpi] = {}
    for sid in service_ids:
        samples = [kpis[sid] for kpis in per_iter if sid in kpis]
        v_mean, v_std = _mean_std([s[0] for s in samples])
        r_mean, r_std = _mean_std([s[1] for s in samples])
        d_mean, d_std = _mean_std([s[2] for s in samples])
        per_service[sid] = ServiceKpi(v_mean, r_mean, d_mean, v_std, r_std, d_std)

    agg_v, agg_v_std = _mean_std([k.violation_pct for k in per_service.values()])
    agg_r, agg_r_std = _mean_std([k.mean_response_s for k in per_service.values()])
    agg_d, agg_d_std = _mean_std([k.resource_delta_mc for k in per_service.values()])
    aggregate = ServiceKpi(agg_v, agg_r, agg_d, agg_v_std, agg_r_std, agg_d_std)

    timeseries: dict[str, dict[str, list[float]]] = {}
    for sid in service_ids:
        sigma_sums: dict[int, list[float]] = {}
        eta_sums: dict[int, list[float]] = {}
        for rows in rows_by_iteration:
            for row in rows:
                if row.service != sid:
                    continue
                sigma_sums.setdefault(row.tick, []).append(row.sigma_s)
                eta_sums.setdefault(row.tick, []).append(row.eta_pct)
        ticks = sorted(sigma_sums)
        timeseries[sid] = {
            "tick": [float(t) for t in ticks],
            "sigma_s": [sum(sigma_sums[t]) / len(sigma_sums[t]) for t in ticks],
            "eta_pct": [sum(eta_sums[t]) / len(eta_sums[t]) for t in ticks],
        }

    return KpiReport(
        scenario=scenario_name,
        policy=policy,
        iterations=len(rows_by_iteration),
        per_service=per_service,
        aggregate=aggregate,
        timeseries=timeseries,
    )


def report_to_dict(report: KpiReport) -> dict:
    return {
        "scenario": report.scenario,
        "policy": report.policy,
        "iterations": report.iterations,
        "per_service": {
            sid: {
                "violation_pct": k.violation_pct,
                "mean_response_s": k.mean_response_s,
                "resource_delta_mc": k.resource_delta_mc,
                "violation_pct_std": k.violation_pct_std,
                "mean_response_s_std": k.mean_response_s_std,
                "resource_delta_mc_std": k.resource_delta_mc_std,
            }
            for sid, k in report.per_service.items()
        },
        "aggregate": {
            "violation_pct": report.aggregate.violation_pct,
            "mean_response_s": report.aggregate.mean_response_s,
            "resource_delta_mc": report.aggregate.resource_delta_mc,
            "violation_pct_std": report.aggregate.violation_pct_std,
            "mean_response_s_std": report.aggregate.mean_response_s_std,
            "resource_delta_mc_std": report.aggregate.resource_delta_mc_std,
        },
        "timeseries": report.timeseries,
    }


def report_from_dict(doc: dict) -> KpiReport:
    def _kpi(entry: dict) -> ServiceKpi:
        return ServiceKpi(
            violation_pct=entry["violation_pct"],
            mean_response_s=entry["mean_response_s"],
            resource_delta_mc=entry["resource_delta_mc"],
            violation_pct_std=entry.get("violation_pct_std", 0.0),
            mean_response_s_std=entry.get("mean_response_s_std", 0.0),
            resource_delta_mc_std=entry.get("resource_delta_mc_std", 0.0),
        )

    return KpiReport(
        scenario=doc["scenario"],
        policy=doc["policy"],
        iterations=doc["iterations"],
        per_service={sid: _kpi(entry) for sid, entry in doc["per_service"].items()},
        aggregate=_kpi(doc["aggregate"]),
        timeseries=doc.get("timeseries", {}),
    )


def save_report(path: str | Path, report: KpiReport) -> None:
    Path(path).write_text(
        json.dumps(report_to_dict(report), sort_keys=True, indent=1), encoding="utf-8"
    )


def load_report(path: str | Path) -> KpiReport:
    return report_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def comparison_table(reports: Sequence[KpiReport]) -> str:
    """Side-by-side text table; all reports must share one scenario."""
    if not reports:
        raise ReportError("need at least one report to compare")
    scenario = reports[0].scenario
    if any(r.scenario != scenario for r in reports):
        names = sorted({r.scenario for r in reports})
        raise ReportError(f"reports mix scenarios {names}; comparison needs one")
    service_ids = sorted({sid for r in reports for sid in r.per_service})
    width = max(12, *(len(r.policy) + 2 for r in reports))
    header = f"{'metric/service':<28}" + "".join(f"{r.policy:>{width}}" for r in reports)
    lines = [f"scenario: {scenario} ({reports[0].iterations} iterations)", header]
    metrics = (
        ("violations %", lambda k: f"{k.violation_pct:.2f}"),
        ("mean response s", lambda k: f"{k.mean_response_s:.3f}"),
        ("resource delta mc", lambda k: f"{k.resource_delta_mc:.0f}"),
    )
    for label, fmt in metrics:
        for sid in service_ids:
            cells = "".join(
                f"{fmt(r.per_service[sid]) if sid in r.per_service else '-':>{width}}"
                for r in reports
            )
            lines.append(f"{label + ' ' + sid:<28}{cells}")
    return "\n".join(lines)
