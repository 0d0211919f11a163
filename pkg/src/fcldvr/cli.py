"""Command-line entry point.

Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 numeric abort.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import analysis, design, output
from .errors import MissingEventLogError, SimulationAborted, ValidationError
from .scenario import load_scenario
from .sim import OperatingMode, run_scenario

log = logging.getLogger("fcldvr")


def _events_path(trace_path: str) -> Path:
    p = Path(trace_path)
    return p.with_name(p.stem + ".events.csv")


def cmd_simulate(args) -> int:
    scenario = load_scenario(args.scenario)
    result = run_scenario(scenario)
    output.write_trace(result.trace, args.out)
    events_path = Path(args.events) if args.events else _events_path(args.out)
    output.write_event_log(result.events, events_path)
    log.info("wrote %d samples to %s, events to %s", len(result.trace), args.out, events_path)
    if args.report:
        metrics = _metrics(result.trace, result.events, scenario)
        output.write_report(output.metrics_to_report(metrics, "simulation metrics"), args.report)
    return 0


def _metrics(trace, events, scenario):
    grid, xfmr = scenario.grid, scenario.transformer
    return analysis.scenario_metrics(
        trace, events, grid.v_source_rms, analysis.nominal_load_voltage(grid, xfmr),
        grid.frequency, baseline_peak=analysis.bolted_fault_peak(grid, xfmr, limited=False),
    )


def _emit(report: output.Report, args) -> None:
    sys.stdout.write(output.format_report(report))
    if getattr(args, "report", None):
        output.write_report(report, args.report)


def cmd_design(args) -> int:
    what = args.what
    rep = output.Report(f"design: {what}")
    omega = 2 * math.pi * args.frequency if getattr(args, "frequency", None) else None
    if what == "lm":
        rated = args.rated_current
        if rated is None:
            if args.load_va is None:
                raise ValidationError("give --rated-current or --load-va")
            rated = design.rated_load_current(args.load_va, args.v_source_rms)
        rep.add("rated_current", rated, "A")
        rep.add("l_m_max", design.size_magnetizing_inductance(
            args.v_source_rms, omega, args.lambda_i, rated), "H")
    elif what == "turns":
        rep.add("turns_ratio", design.turns_ratio_for_sag(args.lambda_v, args.v_line_rms, args.v_ac_inv))
    elif what == "series-ratio":
        rep.add("series_ratio_k", design.series_transformer_ratio(
            args.v_source_rms, args.lambda_i, args.rated_current, omega, args.l_secondary,
            squared=args.squared))
    elif what == "capacity":
        rep.add("transformer_va", design.transformer_capacity(
            args.lambda_i, args.rated_current, args.v_source_rms), "VA")
    elif what == "dc-link":
        rep.add("dc_link_max", design.dc_link_limit(args.v_ces), "V")
        if args.v_dc is not None:
            ok = design.dc_link_ok(args.v_dc, args.v_ces)
            rep.add("v_dc", args.v_dc, "V")
            rep.add("v_dc_admissible", 1.0 if ok else 0.0)
    elif what == "stress":
        mode = {"fault": OperatingMode.FAULT_LIMITING,
                "compensation": OperatingMode.COMPENSATION}[args.mode]
        s = design.switch_stress(mode, args.alpha, args.v_m_peak, args.a, args.v_dc)
        rep.add("stress_positive_half", s.positive_half, "V")
        rep.add("stress_negative_half", s.negative_half, "V")
    elif what == "full":
        spec = design.FaultLimitSpec(args.lambda_i, args.load_va, args.lambda_v)
        rep = output.design_report_to_report(design.design_report(
            spec, args.v_source_rms, args.frequency, args.v_ac_inv, args.l_secondary,
            args.v_ces, args.v_dc, args.alpha))
    _emit(rep, args)
    return 0


def cmd_analyze(args) -> int:
    trace = output.read_trace(args.trace)
    rep = output.Report(f"analysis: {args.what}")
    if args.what in ("rms", "thd"):
        t_end = float(trace.time[-1]) + trace.dt
        window = args.window
        if window is None:
            window = t_end - float(trace.time[0]) if args.what == "rms" else 1.0 / args.fundamental
        start = args.start if args.start is not None else t_end - window
        s = trace.window(start, start + window)
        x = trace.channel(args.channel)[s]
        if args.what == "rms":
            rep.add(f"rms_{args.channel}", analysis.rms(x), "A" if args.channel == "i_line" else "V")
        else:
            rep.add(f"thd_{args.channel}", analysis.thd(x, trace.dt, args.fundamental, args.harmonics))
    else:
        events_path = Path(args.events) if args.events else _events_path(args.trace)
        if not events_path.exists():
            raise MissingEventLogError(f"event log {events_path} not found (use --events)")
        if not args.scenario:
            raise ValidationError("metrics need --scenario for nominal values")
        scenario = load_scenario(args.scenario)
        metrics = _metrics(trace, output.read_event_log(events_path), scenario)
        rep = output.metrics_to_report(metrics)
    _emit(rep, args)
    return 0


def cmd_compare(args) -> int:
    with open(args.params, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{args.params}: {exc}") from None
    if "operating_point" not in doc:
        raise ValidationError("params file needs an 'operating_point' object")
    rows = analysis.topology_comparison(doc["operating_point"], doc.get("entries", {}))
    text = analysis.render_topology_table(rows)
    _emit(output.topology_to_report(rows, text), args)
    return 0


def _add_floats(p, *names, required=True):
    for n in names:
        p.add_argument(f"--{n.replace('_', '-')}", dest=n, type=float, required=required)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fcldvr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write the waveform trace")
    p.add_argument("--scenario", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--report")
    p.add_argument("--events", help="event log path (default: <out>.events.csv)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("design", help="sizing calculations (SI units)")
    dsub = p.add_subparsers(dest="what", required=True)
    d = dsub.add_parser("lm")
    _add_floats(d, "v_source_rms", "frequency", "lambda_i")
    _add_floats(d, "rated_current", "load_va", required=False)
    d = dsub.add_parser("turns")
    _add_floats(d, "lambda_v", "v_line_rms", "v_ac_inv")
    d = dsub.add_parser("series-ratio")
    _add_floats(d, "v_source_rms", "lambda_i", "rated_current", "frequency", "l_secondary")
    d.add_argument("--squared", action="store_true", help="report k^2 instead of k")
    d = dsub.add_parser("capacity")
    _add_floats(d, "lambda_i", "rated_current", "v_source_rms")
    d = dsub.add_parser("dc-link")
    _add_floats(d, "v_ces")
    _add_floats(d, "v_dc", required=False)
    d = dsub.add_parser("stress")
    d.add_argument("--mode", choices=("fault", "compensation"), required=True)
    _add_floats(d, "v_dc")
    _add_floats(d, "alpha", "v_m_peak", "a", required=False)
    d = dsub.add_parser("full")
    _add_floats(d, "load_va", "lambda_i", "lambda_v", "v_source_rms", "frequency",
                "v_ac_inv", "l_secondary", "v_ces", "v_dc")
    _add_floats(d, "alpha", required=False)
    for d in dsub.choices.values():
        d.add_argument("--report")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("analyze", help="post-process a trace file")
    p.add_argument("what", choices=("thd", "rms", "metrics"))
    p.add_argument("--trace", required=True)
    p.add_argument("--window", type=float, help="seconds")
    p.add_argument("--start", type=float, help="window start, seconds")
    p.add_argument("--fundamental", type=float, default=50.0, help="Hz")
    p.add_argument("--channel", default="v_pcc", choices=("v_source", "v_pcc", "v_load", "i_line", "u_comp"))
    p.add_argument("--harmonics", type=int, default=50)
    p.add_argument("--events")
    p.add_argument("--scenario")
    p.add_argument("--report")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compare-topologies", help="evaluate the topology loss table")
    p.add_argument("--params", required=True, help="JSON with operating_point and entries")
    p.add_argument("--report")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SimulationAborted as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
