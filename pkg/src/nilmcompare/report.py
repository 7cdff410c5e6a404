"""Text renderings of evaluation reports, summary rows and event profiles.

Ratios are written with 6 decimals and RMSE with 1 decimal. An evaluation
report always carries NAR, TSR and EVR next to the per-appliance RMSE.
"""

from __future__ import annotations

import csv
import io
import re
from typing import Iterable

from nilmcompare.disaggregation import EvaluationReport
from nilmcompare.events import EventProfile
from nilmcompare.metrics import SummaryRow

UNAVAILABLE = "-"
AVG_FOOTNOTE = "events_avg is the household total of events per day summed over submeters"
DURATION_FOOTNOTE = "effective duration excludes gaps; wall-clock is last minus first timestamp"

METRIC_KEYS = ("algorithm", "denoised", "nar", "tsr", "evr", "samples")

_UNSAFE = re.compile(r"[,|\r\n\"]")


def sanitize(label: str) -> str:
    """Make a label safe for both CSV cells and markdown table cells."""
    return _UNSAFE.sub("_", str(label)).strip() or "_"


def ratio(value: float | None) -> str:
    return UNAVAILABLE if value is None else f"{value:.6f}"


def watts(value: float) -> str:
    return f"{value:.1f}"


def metadata_rows(report: EvaluationReport) -> list[tuple[str, str]]:
    rows = [
        ("dataset", sanitize(report.dataset)),
        ("house", sanitize(report.house)),
        ("algorithm", report.algorithm),
        ("denoised", "true" if report.denoised else "false"),
        ("nar", ratio(report.nar)),
        ("tsr", ratio(report.tsr)),
        ("evr", ratio(report.evr)),
        ("samples", str(report.samples)),
        ("tool_version", report.version),
    ]
    rows += [(f"param.{k}", sanitize(v)) for k, v in report.params.items()]
    return rows


def metrics_block(report: EvaluationReport) -> str:
    """The part of a CSV report that must reproduce exactly on replay."""
    lines = [f"{k},{v}" for k, v in metadata_rows(report) if k in METRIC_KEYS]
    lines += [f"{sanitize(a)},{watts(v)}" for a, v in report.rmse.items()]
    return "\n".join(lines) + "\n"


def emit_report(report: EvaluationReport, fmt: str = "csv") -> str:
    if fmt == "csv":
        lines = ["key,value"]
        lines += [f"{k},{v}" for k, v in metadata_rows(report)]
        lines += ["", "appliance,rmse_w"]
        lines += [f"{sanitize(a)},{watts(v)}" for a, v in report.rmse.items()]
        return "\n".join(lines) + "\n"
    if fmt == "markdown":
        lines = ["| key | value |", "| --- | --- |"]
        lines += [f"| {k} | {v} |" for k, v in metadata_rows(report)]
        lines += ["", f"| appliance | {report.algorithm.upper()} RMSE [W] |", "| --- | ---: |"]
        lines += [f"| {sanitize(a)} | {watts(v)} |" for a, v in report.rmse.items()]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown report format: {fmt!r}")


def parse_report_csv(text: str) -> tuple[dict[str, str], dict[str, str]]:
    """Split a CSV report into its metadata mapping and appliance rows."""
    meta: dict[str, str] = {}
    rmse: dict[str, str] = {}
    target = meta
    for row in csv.reader(io.StringIO(text)):
        if not row:
            target = rmse
            continue
        if row in (["key", "value"], ["appliance", "rmse_w"]):
            continue
        target[row[0]] = row[1]
    return meta, rmse


SUMMARY_COLUMNS = (
    "dataset",
    "house",
    "duration_days_wallclock",
    "duration_days_effective",
    "meters_with_mains",
    "meters_without_mains",
    "mains_interval_s",
    "sub_interval_s",
    "mains_power_types",
    "sub_power_types",
    "events_min",
    "events_avg",
    "events_min_per_day",
    "events_avg_per_day",
    "nar_p",
    "nar_q",
    "nar_s",
)


def _opt(value, fmt: str = "{}") -> str:
    return UNAVAILABLE if value is None else fmt.format(value)


def summary_values(row: SummaryRow) -> list[str]:
    return [
        sanitize(row.dataset),
        sanitize(row.house),
        _opt(row.duration_days_wallclock, "{:.3f}"),
        _opt(row.duration_days_effective, "{:.3f}"),
        str(row.meters_with_mains),
        str(row.meters_without_mains),
        _opt(row.mains_interval_s),
        _opt(row.sub_interval_s),
        " ".join(row.mains_power_types) or UNAVAILABLE,
        " ".join(row.sub_power_types) or UNAVAILABLE,
        _opt(row.events_min_reported),
        _opt(row.events_avg_reported),
        _opt(row.events_min_per_day, "{:.6f}"),
        _opt(row.events_avg_per_day, "{:.6f}"),
        ratio(row.nar.get("P")),
        ratio(row.nar.get("Q")),
        ratio(row.nar.get("S")),
    ]


def emit_summary(rows: Iterable[SummaryRow], fmt: str = "csv") -> str:
    rows = list(rows)
    if fmt == "csv":
        lines = [",".join(SUMMARY_COLUMNS)] + [",".join(summary_values(r)) for r in rows]
        return "\n".join(lines) + "\n"
    if fmt == "markdown":
        lines = ["| " + " | ".join(SUMMARY_COLUMNS) + " |", "|" + " --- |" * len(SUMMARY_COLUMNS)]
        lines += ["| " + " | ".join(summary_values(r)) + " |" for r in rows]
        lines += ["", f"Note: {AVG_FOOTNOTE}.", f"Note: {DURATION_FOOTNOTE}."]
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown summary format: {fmt!r}")


def emit_events(profiles: Iterable[EventProfile]) -> str:
    lines = ["label,levels,event_count,events_per_day"]
    for p in profiles:
        levels = " ".join(f"{v:.3f}" for v in p.state_set.levels)
        lines.append(f"{sanitize(p.label)},{levels},{p.event_count},{p.events_per_day:.6f}")
    return "\n".join(lines) + "\n"
