"""Comparison plots: response time and utilization over ticks, per policy.

Every figure is emitted twice: a rendered PNG and the underlying CSV so
automated checks can diff data instead of pixels.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .kpi import KpiReport, ReportError


def _series_csv(reports: Sequence[KpiReport], field: str) -> str:
    lines = ["policy,service,tick,value"]
    for report in reports:
        for sid in sorted(report.timeseries):
            series = report.timeseries[sid]
            for tick, value in zip(series["tick"], series[field]):
                lines.append(f"{report.policy},{sid},{int(tick)},{value!r}")
    return "\n".join(lines) + "\n"


def emit_comparison(reports: Sequence[KpiReport], outdir: str | Path) -> list[Path]:
    """Write sigma/eta line plots plus their CSVs; returns created paths."""
    if not reports:
        raise ReportError("nothing to plot")
    scenario = reports[0].scenario
    if any(r.scenario != scenario for r in reports):
        raise ReportError("cannot plot reports from different scenarios")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    created: list[Path] = []

    panels = (
        ("sigma_s", "response time (s)", "response"),
        ("eta_pct", "utilization (%)", "utilization"),
    )
    for field, ylabel, stem in panels:
        fig, axes = plt.subplots(
            1, len(reports), figsize=(5.5 * len(reports), 4.0), squeeze=False, sharey=True
        )
        for ax, report in zip(axes[0], reports):
            for sid in sorted(report.timeseries):
                series = report.timeseries[sid]
                ax.plot(series["tick"], series[field], label=sid)
            ax.set_title(report.policy)
            ax.set_xlabel("tick (s)")
            ax.grid(alpha=0.3)
        axes[0][0].set_ylabel(ylabel)
        axes[0][-1].legend(loc="upper right", fontsize=8)
        fig.suptitle(f"{scenario}: {ylabel} over time")
        fig.tight_layout()
        png = outdir / f"{scenario}_{stem}.png"
        fig.savefig(png, dpi=120)
        plt.close(fig)
        csv = outdir / f"{scenario}_{stem}.csv"
        csv.write_text(_series_csv(reports, field), encoding="utf-8")
        created += [png, csv]
    return created
