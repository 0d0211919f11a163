"""Waveform, event-log and report files.

Traces are plain comma-separated text with a fixed header; numbers carry
nine significant digits and always use ``.`` as the decimal separator.
Reports are human-readable ``name = value unit`` lines followed by a
``[data]`` section holding the same results as JSON.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .sim import EventRecord, WaveformTrace

TRACE_HEADER = "time_s,v_source_V,v_pcc_V,v_load_V,i_line_A,u_comp_V,mode,switches"
EVENT_HEADER = ["time_s", "kind", "detail", "i_before_A", "i_after_A"]


def _g9(x: float) -> str:
    return f"{x:.9g}"


def format_trace(trace: WaveformTrace) -> str:
    if len(trace) == 0:
        raise ValidationError("cannot write an empty trace")
    cols = (trace.time, trace.v_source, trace.v_pcc, trace.v_load, trace.i_line, trace.u_comp)
    lines = [TRACE_HEADER]
    for k in range(len(trace)):
        nums = ",".join(_g9(float(c[k])) for c in cols)
        lines.append(f"{nums},{trace.mode[k]},{int(bool(trace.switches[k]))}")
    return "\n".join(lines) + "\n"


def write_trace(trace: WaveformTrace, destination) -> None:
    text = format_trace(trace)
    with open(destination, "w", encoding="ascii", newline="") as fh:
        fh.write(text)


def parse_trace(text: str, dt: float | None = None) -> WaveformTrace:
    lines = text.splitlines()
    if not lines or lines[0].strip() != TRACE_HEADER:
        raise ValidationError("not a trace file: header mismatch")
    rows = [ln.split(",") for ln in lines[1:] if ln.strip()]
    if not rows:
        raise ValidationError("trace file has no samples")
    try:
        num = np.array([[float(v) for v in r[:6]] for r in rows])
    except (ValueError, IndexError) as exc:
        raise ValidationError(f"malformed trace row: {exc}") from None
    mode = np.array([r[6] for r in rows], dtype="<U1")
    if not set(mode.tolist()) <= {"N", "C", "F"}:
        raise ValidationError("mode column must hold N, C or F")
    switches = np.array([r[7].strip() == "1" for r in rows], dtype=bool)
    if dt is None:
        dt = (num[-1, 0] - num[0, 0]) / (len(rows) - 1) if len(rows) > 1 else math.nan
    return WaveformTrace(dt, num[:, 0], num[:, 1], num[:, 2], num[:, 3], num[:, 4], num[:, 5],
                         mode, switches)


def read_trace(path, dt: float | None = None) -> WaveformTrace:
    with open(path, encoding="ascii") as fh:
        return parse_trace(fh.read(), dt)


def write_event_log(events: Iterable[EventRecord], destination) -> None:
    with open(destination, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVENT_HEADER)
        for ev in events:
            w.writerow([
                repr(float(ev.time)), ev.kind, ev.detail,
                "" if ev.i_before is None else repr(float(ev.i_before)),
                "" if ev.i_after is None else repr(float(ev.i_after)),
            ])


def read_event_log(path) -> list[EventRecord]:
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        if next(reader, None) != EVENT_HEADER:
            raise ValidationError(f"{path}: not an event log")
        out = []
        for row in reader:
            t, kind, detail, ib, ia = row
            out.append(EventRecord(float(t), kind, detail,
                                   float(ib) if ib else None, float(ia) if ia else None))
        return out


# -- reports ---------------------------------------------------------------------


@dataclass(frozen=True)
class ReportEntry:
    name: str
    value: float | None
    unit: str


@dataclass
class Report:
    title: str
    entries: list[ReportEntry] = field(default_factory=list)
    table: list[dict[str, Any]] | None = None
    table_text: str | None = None

    def add(self, name: str, value, unit: str = "") -> Report:
        self.entries.append(ReportEntry(name, None if value is None else float(value), unit))
        return self


def format_number(x: float | None) -> str:
    """Four significant digits, compact exponent: ``0.07202 -> '7.202e-2'``."""
    if x is None:
        return "n/a"
    if not math.isfinite(x):
        return repr(float(x))
    if x == 0:
        return "0"
    exp = math.floor(math.log10(abs(x)))
    mant = x / 10.0**exp
    if round(abs(mant), 3) >= 10.0:
        mant /= 10.0
        exp += 1
    return f"{mant:.3f}e{exp}"


def format_report(report: Report) -> str:
    lines = [f"# {report.title}", ""]
    if not report.entries and not report.table_text:
        lines.append("(no results)")
    for e in report.entries:
        unit = f" {e.unit}" if e.unit else ""
        lines.append(f"{e.name} = {format_number(e.value)}{unit}")
    if report.table_text:
        lines += ["", report.table_text.rstrip("\n")]
    data = {
        "title": report.title,
        "results": [dataclasses.asdict(e) for e in report.entries],
    }
    if report.table is not None:
        data["table"] = report.table
    lines += ["", "[data]", json.dumps(data, indent=2, ensure_ascii=False)]
    return "\n".join(lines) + "\n"


def write_report(report: Report, destination) -> None:
    with open(destination, "w", encoding="utf-8") as fh:
        fh.write(format_report(report))


def read_report_data(path) -> dict:
    """Structured ``[data]`` section of a report file."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    marker = "\n[data]\n"
    if marker not in text:
        raise ValidationError(f"{path}: no [data] section")
    return json.loads(text.split(marker, 1)[1])


def design_report_to_report(design) -> Report:
    rep = Report("FCL-DVR design")
    for f in dataclasses.fields(design):
        rep.add(f.name, getattr(design, f.name), design.UNITS[f.name])
    return rep


def metrics_to_report(metrics, title: str = "scenario metrics") -> Report:
    units = {"sag_depth": "", "compensation_error": "", "limited_amplitude": "A",
             "limiting_ratio": "", "max_fault_current": "A"}
    rep = Report(title)
    for f in dataclasses.fields(metrics):
        rep.add(f.name, getattr(metrics, f.name), units.get(f.name, ""))
    return rep


def losses_to_report(losses, title: str = "power loss") -> Report:
    rep = Report(title)
    for name in ("p_core", "p_copper", "p_switch", "p_total"):
        rep.add(name, getattr(losses, name), "W")
    return rep


def topology_to_report(rows: Sequence, table_text: str) -> Report:
    rep = Report("topology comparison", table_text=table_text)
    rep.table = [
        {
            "reference": r.entry.label,
            "transformers": {"value": r.entry.transformers, "unit": "count"},
            "switches_3ph": {"value": r.entry.switches_3ph, "unit": "count"},
            "dc_sources_3ph": {"value": r.entry.dc_sources_3ph, "unit": "count"},
            "loss_1ph": {"value": r.loss, "unit": "W"},
            "loss_formula": r.entry.loss_formula,
            "compensates_sag": r.entry.compensates_sag,
            "limits_fault": r.entry.limits_fault,
        }
        for r in rows
    ]
    return rep
