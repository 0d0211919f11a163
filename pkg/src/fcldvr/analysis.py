"""Post-processing of traces: RMS, harmonic content, scenario metrics, losses
and the topology loss comparison."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from .circuit import GridParams, PhasorImpedance, SwitchParams, TransformerParams, pcc_voltage_normal
from .errors import MissingEventLogError, MissingParameterError, ValidationError
from .sim import EventRecord, OperatingMode, WaveformTrace, mode_intervals


def rms(values) -> float:
    x = np.asarray(values, dtype=float)
    if x.size == 0:
        raise ValidationError("RMS of an empty window")
    return float(np.sqrt(np.mean(x * x)))


def channel_rms(trace: WaveformTrace, channel: str, start: float, end: float) -> float:
    """RMS of ``channel`` over samples with ``start <= t < end``."""
    return rms(trace.channel(channel)[trace.window(start, end)])


def rolling_rms(values, n: int) -> np.ndarray:
    """RMS over every run of ``n`` consecutive samples; entry ``k`` ends at ``k + n - 1``."""
    x = np.asarray(values, dtype=float)
    if n < 1 or n > x.size:
        raise ValidationError(f"window of {n} samples does not fit {x.size} samples")
    c = np.concatenate(([0.0], np.cumsum(x * x)))
    return np.sqrt(np.maximum(c[n:] - c[:-n], 0.0) / n)


def _periods(n_samples: int, dt: float, fundamental: float) -> int:
    cycles = n_samples * dt * fundamental
    k = int(round(cycles))
    if k < 1 or abs(cycles - k) > 1e-6 * max(1.0, cycles):
        raise ValidationError(
            f"window of {n_samples} samples is {cycles:.6g} periods, not a whole number"
        )
    return k


def harmonic_rms(values, dt: float, fundamental: float, harmonic_cap: int = 50) -> np.ndarray:
    """RMS of each harmonic ``h = 0..H`` of a whole-period window.

    Harmonics above Nyquist are dropped, so the result may be shorter than
    ``harmonic_cap + 1``.
    """
    x = np.asarray(values, dtype=float)
    cycles = _periods(x.size, dt, fundamental)
    spec = np.fft.rfft(x) / x.size
    bins = np.arange(0, harmonic_cap + 1) * cycles
    bins = bins[bins < spec.size]
    amp = np.abs(spec[bins])
    out = amp * math.sqrt(2.0)
    out[0] = amp[0]
    # the Nyquist bin (even length) is not mirrored
    if x.size % 2 == 0 and bins[-1] == spec.size - 1 and bins.size > 1:
        out[-1] = amp[-1]
    return out


def thd(values, dt: float, fundamental: float, harmonic_cap: int = 50) -> float:
    """Total harmonic distortion, ``sqrt(sum_{h>=2} V_h^2) / V_1``."""
    h = harmonic_rms(values, dt, fundamental, harmonic_cap)
    if h.size < 2 or h[1] <= 1e-12 * max(float(np.max(h)), 1e-300):
        raise ValidationError("zero fundamental component")
    return float(np.sqrt(np.sum(h[2:] ** 2)) / h[1])


def fundamental_amplitude(t, values, frequency: float) -> float:
    """Peak amplitude of the fundamental, after removing a quadratic trend.

    The trend terms absorb slowly decaying DC offsets such as the one left
    in the line current when the limiter inserts its inductance.
    """
    t = np.asarray(t, dtype=float)
    x = np.asarray(values, dtype=float)
    if x.size < 5:
        raise ValidationError("need at least 5 samples for a fundamental fit")
    tc = t - t.mean()
    w = 2.0 * math.pi * frequency
    basis = np.column_stack((np.ones_like(tc), tc, tc * tc, np.cos(w * t), np.sin(w * t)))
    coef, *_ = np.linalg.lstsq(basis, x, rcond=None)
    return float(math.hypot(coef[3], coef[4]))


# -- losses --------------------------------------------------------------------


@dataclass(frozen=True)
class LossBreakdown:
    p_core: float
    p_copper: float
    p_switch: float

    @property
    def p_total(self) -> float:
        return self.p_core + self.p_copper + self.p_switch


def power_loss(
    mode: OperatingMode,
    xfmr: TransformerParams,
    switches: SwitchParams,
    i_primary_rms: float,
    i_secondary_rms: float,
    i_line_rms: float,
) -> LossBreakdown:
    """Device losses: core + winding copper, plus IGBT conduction unless limiting."""
    if min(i_primary_rms, i_secondary_rms, i_line_rms) < 0:
        raise ValidationError("currents must be >= 0")
    copper = xfmr.r_primary * i_primary_rms**2 + xfmr.r_secondary_referred * i_secondary_rms**2
    switch = 0.0
    if mode is not OperatingMode.FAULT_LIMITING:
        switch = switches.v_on_drop * i_line_rms
    return LossBreakdown(xfmr.p_core, copper, switch)


# -- topology comparison ----------------------------------------------------------


@dataclass(frozen=True)
class TopologyEntry:
    label: str
    transformers: int
    switches_3ph: int
    dc_sources_3ph: int
    loss_formula: str
    symbols: tuple[str, ...]
    evaluate: Callable[[Mapping[str, float]], float] | None
    compensates_sag: bool
    limits_fault: bool


def _loss_1(p):
    return ((p["i_pri"] * p["R_S1"] + p["i_sec"] ** 2 * p["R_S2"]) * p["i_pri"]
            + (2 * p["V_DF"] + p["V_SW"] + p["r_d"] * p["I_d"]) * p["I_DC"])


def _loss_23(p):
    return ((p["i_pri"] * p["R_S1"] + p["i_sec"] ** 2 * p["R_S2"]) * p["i_pri"]
            + (math.sqrt(2) * p["I_N"] * p["R_C"] + 2 * p["V_D"] + p["V_igbt"]) * p["I_DC"])


def _loss_24(p):
    return (p["P_core"] + (p["R_T1"] * p["i_pri"] ** 2 + p["R_T2_series"] * p["i_sec"] ** 2)
            + p["V_igbt"] * p["I_line"])


def _loss_22(p):
    return (p["P_core_series"]
            + (p["R_T1_series"] * p["i_pri"] ** 2 + p["R_T2_series"] * p["i_sec"] ** 2)
            + p["P_loss_diode"] + p["V_igbt"] * p["I_line"] + p["V_thyristor"] * p["I_line"])


def _loss_proposed(p):
    return (p["P_core"] + p["R_T1"] * p["i_pri"] ** 2 + p["R_T2"] * p["i_sec"] ** 2
            + p["V_igbt"] * p["I_line"])


TOPOLOGIES: tuple[TopologyEntry, ...] = (
    TopologyEntry(
        "[1]", 2, 1, 0,
        "(i_pri*R_S1 + i_sec^2*R_S2)*i_pri + (2*V_DF + V_SW + r_d*I_d)*I_DC",
        ("i_pri", "i_sec", "R_S1", "R_S2", "V_DF", "V_SW", "r_d", "I_d", "I_DC"),
        _loss_1, False, True,
    ),
    TopologyEntry(
        "[23]", 1, 1, 1,
        "(i_pri*R_S1 + i_sec^2*R_S2)*i_pri + (sqrt(2)*I_N*R_C + 2*V_D + V_igbt)*I_DC",
        ("i_pri", "i_sec", "R_S1", "R_S2", "I_N", "R_C", "V_D", "V_igbt", "I_DC"),
        _loss_23, False, True,
    ),
    TopologyEntry(
        "[24]", 1, 6, 0,
        "P_core + (R_T1*i_pri^2 + R_T2_series*i_sec^2) + V_igbt*I_line",
        ("P_core", "R_T1", "R_T2_series", "i_pri", "i_sec", "V_igbt", "I_line"),
        _loss_24, False, True,
    ),
    TopologyEntry(
        "[22]", 2, 24, 3,
        "P_core_series + (R_T1_series*i_pri^2 + R_T2_series*i_sec^2) + P_loss_diode"
        " + V_igbt*I_line + V_thyristor*I_line",
        ("P_core_series", "R_T1_series", "R_T2_series", "i_pri", "i_sec", "P_loss_diode",
         "V_igbt", "V_thyristor", "I_line"),
        _loss_22, True, True,
    ),
    TopologyEntry("[9]", 2, 10, 0, "N/A", (), None, True, True),
    TopologyEntry(
        "proposed", 1, 6, 3,
        "P_core + R_T1*i_pri^2 + R_T2*i_sec^2 + V_igbt*I_line",
        ("P_core", "R_T1", "R_T2", "i_pri", "i_sec", "V_igbt", "I_line"),
        _loss_proposed, True, True,
    ),
)

OPERATING_POINT_SYMBOLS = ("i_pri", "i_sec", "I_line")


def proposed_parameters(xfmr: TransformerParams, switches: SwitchParams) -> dict[str, float]:
    return {"P_core": xfmr.p_core, "R_T1": xfmr.r_primary,
            "R_T2": xfmr.r_secondary_referred, "V_igbt": switches.v_on_drop}


@dataclass(frozen=True)
class TopologyRow:
    entry: TopologyEntry
    loss: float | None


def topology_comparison(
    operating_point: Mapping[str, float],
    params: Mapping[str, Mapping[str, float]],
    entries: Sequence[TopologyEntry] = TOPOLOGIES,
) -> list[TopologyRow]:
    """Evaluate each entry's single-phase loss at a shared operating point.

    ``operating_point`` supplies ``i_pri``, ``i_sec`` and ``I_line``;
    ``params[label]`` supplies the entry's remaining symbols.
    """
    rows = []
    for entry in entries:
        if entry.evaluate is None:
            rows.append(TopologyRow(entry, None))
            continue
        values = dict(operating_point)
        values.update(params.get(entry.label, {}))
        for sym in entry.symbols:
            if sym not in values:
                raise MissingParameterError(entry.label, sym)
        rows.append(TopologyRow(entry, float(entry.evaluate(values))))
    return rows


def render_topology_table(rows: Sequence[TopologyRow]) -> str:
    yn = {True: "YES", False: "NO"}
    header = ("reference", "transformers", "switches(3ph)", "dc sources(3ph)",
              "loss(1ph) W", "sag comp.", "fault limit")
    body = [
        (r.entry.label, str(r.entry.transformers), str(r.entry.switches_3ph),
         str(r.entry.dc_sources_3ph), "N/A" if r.loss is None else f"{r.loss:.6g}",
         yn[r.entry.compensates_sag], yn[r.entry.limits_fault])
        for r in rows
    ]
    widths = [max(len(row[i]) for row in (header, *body)) for i in range(len(header))]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    return "\n".join(fmt.format(*row).rstrip() for row in (header, *body)) + "\n"


# -- scenario metrics ------------------------------------------------------------


@dataclass(frozen=True)
class ScenarioMetrics:
    sag_depth: float
    compensation_error: float | None
    limited_amplitude: float | None
    limiting_ratio: float | None
    max_fault_current: float | None


def event_windows(events: Sequence[EventRecord], kind: str) -> list[tuple[float, float]]:
    """Pair ``<kind>_start`` / ``<kind>_end`` records into time windows."""
    out, start = [], None
    for ev in events:
        if ev.kind == f"{kind}_start":
            start = ev.time
        elif ev.kind == f"{kind}_end" and start is not None:
            out.append((start, ev.time))
            start = None
    return out


def steady_fault_amplitude(trace: WaveformTrace, start: float, end: float,
                           frequency: float, periods: int = 2) -> float:
    """Fundamental amplitude of ``i_line`` over the last ``periods`` cycles of a window."""
    span = periods / frequency
    if end - start < span:
        raise ValidationError("fault window shorter than the fitting span")
    s = trace.window(end - span, end)
    return fundamental_amplitude(trace.time[s], trace.i_line[s], frequency)


def scenario_metrics(
    trace: WaveformTrace,
    events: Sequence[EventRecord] | None,
    v_source_nominal_rms: float,
    v_load_nominal_rms: float,
    frequency: float,
    baseline_peak: float | None = None,
) -> ScenarioMetrics:
    """Quantify sag depth, compensation quality and fault limiting for a run.

    RMS values use half-period sliding windows; compensation error counts
    only windows lying entirely inside a Compensation interval.
    ``baseline_peak`` is the unlimited fault peak (from a paired run with
    the limiter disabled, or closed form); without it no ratio is given.
    """
    if events is None:
        raise MissingEventLogError("scenario metrics need the run's event log")
    n = max(1, int(round(0.5 / (frequency * trace.dt))))
    src = rolling_rms(trace.v_source, n)
    sag_depth = max(0.0, 1.0 - float(src.min()) / v_source_nominal_rms)

    comp_err = None
    load = rolling_rms(trace.v_load, n)
    for a, b in mode_intervals(trace, OperatingMode.COMPENSATION):
        s = trace.window(a, b)
        ends = np.arange(s.start + n - 1, s.stop)
        if ends.size:
            err = float(np.max(np.abs(load[ends - n + 1] - v_load_nominal_rms)) / v_load_nominal_rms)
            comp_err = err if comp_err is None else max(comp_err, err)

    faults = event_windows(events, "fault")
    limited = ratio = max_i = None
    if faults:
        amps, peaks = [], []
        for a, b in faults:
            amps.append(steady_fault_amplitude(trace, a, b, frequency))
            peaks.append(float(np.max(np.abs(trace.i_line[trace.window(a, b)]))))
        limited = max(amps)
        max_i = max(peaks)
        if baseline_peak is not None:
            ratio = baseline_peak / limited
    return ScenarioMetrics(sag_depth, comp_err, limited, ratio, max_i)


def nominal_load_voltage(grid: GridParams, xfmr: TransformerParams) -> float:
    """Steady PCC voltage RMS with the switch pair conducting."""
    z_source = grid.source_impedance() + PhasorImpedance(
        xfmr.r_primary + xfmr.r_secondary_referred, 0.0
    )
    return pcc_voltage_normal(
        grid.load_impedance(), z_source, xfmr.leakage_impedance(grid.omega), grid.v_source_rms
    )


def bolted_fault_peak(grid: GridParams, xfmr: TransformerParams, limited: bool) -> float:
    """Steady peak line current for a bolted PCC fault, with or without limiting."""
    r = grid.r_source_line + xfmr.r_primary
    l = grid.l_source_line + xfmr.l_leakage
    if limited:
        l += xfmr.l_magnetizing
    else:
        r += xfmr.r_secondary_referred
    return grid.v_m / abs(complex(r, grid.omega * l))


def power_efficiency(trace: WaveformTrace, start: float, end: float) -> float:
    """Mean power delivered at the PCC over mean source power in a window."""
    s = trace.window(start, end)
    p_in = float(np.mean(trace.v_source[s] * trace.i_line[s]))
    if p_in <= 0:
        raise ValidationError("source delivers no net power in the window")
    return float(np.mean(trace.v_load[s] * trace.i_line[s])) / p_in
