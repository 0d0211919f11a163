"""Acceptance suite for the FCL-DVR simulator and toolkit.

Every criterion prints one ``PASS`` / ``FAIL`` line with the measured
numbers.  Run it through pytest (``pytest tests/test_acceptance.py -v -s``)
or directly (``python tests/test_acceptance.py``) for just the summary.

Criteria (``table2`` preset unless noted):
  1. Settled normal-mode current vs the closed form, <= 0.5 % at dt = 10 us.
  2. 28 % sag: compensated load RMS within 5 % of nominal; uncompensated depth 28 +/- 1 %.
  3. Bolted fault: limited amplitude within 2 % of 12.05 A; unlimited about 445.6 A;
     ratio 37 +/- 5 %.
  4. Design round trips to 1e-12, and the sized L_m validated in simulation within 2 %.
  5. Stress and loss spot values.
  6. PCC divider spot values to 0.01 V.
  7. Topology table counts and flags; proposed row equals the Normal-mode loss model.
  8. Property checks: ODE residuals, current continuity, THD, convergence, determinism.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
import pytest

from fcldvr.analysis import (
    TOPOLOGIES,
    bolted_fault_peak,
    harmonic_rms,
    nominal_load_voltage,
    power_loss,
    proposed_parameters,
    rms,
    rolling_rms,
    steady_fault_amplitude,
    thd,
    topology_comparison,
)
from fcldvr.circuit import (
    PhasorImpedance,
    SwitchParams,
    TransformerParams,
    fault_branch,
    fault_mode_current,
    normal_branch,
    normal_mode_current,
    normal_mode_solution,
    pcc_voltage_fault,
    pcc_voltage_normal,
)
from fcldvr.design import (
    limited_fault_current,
    rated_load_current,
    series_transformer_ratio,
    size_magnetizing_inductance,
    switch_stress,
)
from fcldvr.scenario import PRESETS, sag_fault_scenario
from fcldvr.sim import ControllerConfig, FaultEvent, OperatingMode, SagEvent, run_scenario

TABLE2 = PRESETS["table2"]
GRID, XFMR, SW = TABLE2.grid, TABLE2.transformer, TABLE2.switches
W = GRID.omega
PERIOD = GRID.period


def _line(number: int, title: str, ok: bool, details: list[str]) -> str:
    return f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} | " + "; ".join(details)


def _rel(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


def criterion_1():
    res = run_scenario(TABLE2.with_events(horizon=0.2), initial="zero")
    tr = res.trace
    s = tr.window(0.2 - PERIOD, 0.2)
    ref = normal_mode_current(tr.time[s], GRID, XFMR)
    peak_sim = float(np.max(np.abs(tr.i_line[s])))
    peak_cf = normal_mode_solution(GRID, XFMR).amplitude
    point_err = float(np.max(np.abs(tr.i_line[s] - ref))) / peak_cf
    amp_err = _rel(peak_sim, peak_cf)
    ok = amp_err <= 0.005 and point_err <= 0.005 and _rel(peak_cf, 6.874) <= 1e-4
    return ok, [f"closed-form peak {peak_cf:.4f} A", f"simulated peak {peak_sim:.4f} A",
                f"amplitude error {amp_err:.2e}", f"worst sample error {point_err:.2e} (limit 5e-3)"]


def criterion_2():
    scn = TABLE2.with_events(SagEvent(0.1, 0.2, 0.28), horizon=0.3)
    v_nom = nominal_load_voltage(GRID, XFMR)
    half = int(round(0.5 * PERIOD / scn.dt))

    on = run_scenario(scn)
    (t0, t1), = on.mode_intervals(OperatingMode.COMPENSATION)
    latency = t0 - 0.1
    tr = on.trace
    # half-period windows lying inside the compensation interval
    load = rolling_rms(tr.v_load, half)
    a = tr.window(t0, t1)
    ends = np.arange(a.start + half - 1, a.stop)
    worst = float(np.max(np.abs(load[ends - half + 1] - v_nom))) / v_nom

    off_cfg = ControllerConfig.for_frequency(GRID.frequency, compensation_enabled=False)
    off = run_scenario(scn.with_events(*scn.events, controller=off_cfg)).trace
    b = off.window(0.1, 0.2)
    off_load = rolling_rms(off.v_load[b], half)
    depth = 1.0 - float(off_load.min()) / v_nom
    ok = latency <= 0.5 * PERIOD + scn.dt and worst <= 0.05 and abs(depth - 0.28) <= 0.01
    return ok, [f"detection latency {latency * 1e3:.2f} ms", f"compensated worst deviation {worst:.2%}",
                f"uncompensated depth {depth:.2%}"]


def criterion_3():
    scn = TABLE2.with_events(FaultEvent(0.25, 0.35, 0.0), horizon=0.4)
    on = run_scenario(scn)
    limited = steady_fault_amplitude(on.trace, 0.25, 0.35, GRID.frequency)
    off_cfg = ControllerConfig.for_frequency(GRID.frequency, limiter_enabled=False)
    off = run_scenario(scn.with_events(*scn.events, controller=off_cfg))
    unlimited = steady_fault_amplitude(off.trace, 0.25, 0.35, GRID.frequency)
    ratio = unlimited / limited
    cf_lim = bolted_fault_peak(GRID, XFMR, limited=True)
    cf_unl = bolted_fault_peak(GRID, XFMR, limited=False)
    ok = (_rel(limited, 12.05) <= 0.02 and _rel(unlimited, 445.6) <= 0.01
          and _rel(ratio, 37.0) <= 0.05)
    return ok, [f"limited {limited:.3f} A (closed form {cf_lim:.3f})",
                f"unlimited {unlimited:.2f} A (closed form {cf_unl:.2f})", f"ratio {ratio:.2f}"]


def criterion_4():
    lam, i_rated = 2.0, rated_load_current(1069.4, 220.0)
    lm = size_magnetizing_inductance(220.0, W, lam, i_rated)
    rt = _rel(limited_fault_current(220.0, W, lm), lam * i_rated)
    k = series_transformer_ratio(220.0, lam, i_rated, W, 3.2e-3)
    rt_k = _rel(220.0 / (k * k * W * 3.2e-3), lam * i_rated)

    # the sized value is the whole transformer series inductance while limiting
    xf = TransformerParams(XFMR.turns_ratio_a, l_magnetizing=lm, l_leakage=0.0)
    scn = TABLE2.with_events(FaultEvent(0.25, 0.35, 0.0), horizon=0.4, transformer=xf, preset=None)
    res = run_scenario(scn)
    amp = steady_fault_amplitude(res.trace, 0.25, 0.35, GRID.frequency)
    target = lam * i_rated * math.sqrt(2.0)
    sim_err = _rel(amp, target)
    ok = rt <= 1e-12 and rt_k <= 1e-12 and sim_err <= 0.02
    return ok, [f"L_m,max {lm:.6g} H", f"sizing round trip {rt:.1e}", f"ratio round trip {rt_k:.1e}",
                f"simulated {amp:.3f} A vs {target:.3f} A ({sim_err:.2%})"]


def criterion_5():
    fault = switch_stress(OperatingMode.FAULT_LIMITING, 0.28, 311.13, 5.0, 40.0)
    comp = switch_stress(OperatingMode.COMPENSATION, v_dc=40.0)
    xf = TransformerParams(5.0, 0.08, 0.0017, r_primary=0.05, r_secondary_referred=0.05, p_core=2.0)
    sw = SwitchParams(1200.0, 2.0, 40.0)
    i = 4.861
    p_n = power_loss(OperatingMode.NORMAL, xf, sw, i, i, i).p_total
    p_f = power_loss(OperatingMode.FAULT_LIMITING, xf, sw, i, i, i).p_total
    # independent arithmetic for each quantity
    want = {
        "stress +": (fault.positive_half, 0.28 * 311.13 / 5.0 + 40.0, 57.42, 2),
        "stress -": (fault.negative_half, -0.28 * 311.13 / 5.0 + 40.0, 22.58, 2),
        "stress comp": (comp.rating, 2 * 40.0, 80.0, 2),
        "loss N": (p_n, 2.0 + 0.05 * i * i + 0.05 * i * i + 2.0 * i, 14.085, 3),
        "loss F": (p_f, 2.0 + 0.05 * i * i + 0.05 * i * i, 4.363, 3),
    }
    ok, details = True, []
    for name, (got, exact, shown, digits) in want.items():
        good = _rel(got, exact) <= 1e-9 and round(got, digits) == shown
        ok &= good
        details.append(f"{name} {got:.6g}")
    return ok, details


def criterion_6():
    z_s, z_t = PhasorImpedance(0.1, 0.157), PhasorImpedance(0.0, 0.534)
    v_n = pcc_voltage_normal(PhasorImpedance(45.0, 3.142), z_s, z_t, 220.0)
    v_f = pcc_voltage_fault(PhasorImpedance(0, 0), PhasorImpedance(0, 25.133), z_s, z_t, 220.0)
    ok = abs(v_n - 219.25) <= 0.01 and abs(v_f - 214.1) <= 0.01
    return ok, [f"normal {v_n:.4f} V vs 219.25 (diff {v_n - 219.25:+.4f})",
                f"fault {v_f:.4f} V vs 214.1 (diff {v_f - 214.1:+.4f})"]


EXPECTED_TOPOLOGIES = {
    "[1]": (2, 1, 0, False, True),
    "[23]": (1, 1, 1, False, True),
    "[24]": (1, 6, 0, False, True),
    "[22]": (2, 24, 3, True, True),
    "[9]": (2, 10, 0, True, True),
    "proposed": (1, 6, 3, True, True),
}


def criterion_7():
    got = {e.label: (e.transformers, e.switches_3ph, e.dc_sources_3ph, e.compensates_sag, e.limits_fault)
           for e in TOPOLOGIES}
    counts_ok = got == EXPECTED_TOPOLOGIES and [e.label for e in TOPOLOGIES] == list(EXPECTED_TOPOLOGIES)
    na_ok = next(e for e in TOPOLOGIES if e.label == "[9]").evaluate is None

    rng = np.random.default_rng(20240601)
    worst = 0.0
    proposed = [e for e in TOPOLOGIES if e.label == "proposed"]
    for _ in range(1000):
        xf = TransformerParams(5.0, 0.08, 0.0017, r_primary=rng.uniform(0, 1),
                               r_secondary_referred=rng.uniform(0, 1), p_core=rng.uniform(0, 50))
        sw = SwitchParams(1200.0, rng.uniform(0, 5), 40.0)
        cur = rng.uniform(0, 100, size=3)
        op = dict(zip(("i_pri", "i_sec", "I_line"), cur))
        (row,) = topology_comparison(op, {"proposed": proposed_parameters(xf, sw)}, entries=proposed)
        ref = power_loss(OperatingMode.NORMAL, xf, sw, *cur).p_total
        worst = max(worst, abs(row.loss - ref) / max(ref, 1e-300))
    ok = counts_ok and na_ok and worst <= 1e-12
    return ok, [f"six rows match: {counts_ok}", f"[9] loss N/A: {na_ok}",
                f"proposed vs loss model, worst relative gap {worst:.1e} over 1000 points"]


def _ode_residual(current, r, l, t):
    h = 1e-7
    di = (current(t + h) - current(t - h)) / (2 * h)
    res = GRID.v_m * np.sin(W * t) - l * di - r * current(t)
    return float(np.max(np.abs(res))) / GRID.v_m


def criterion_8():
    checks = {}
    t = np.linspace(0.0031, 0.3, 301)
    r, l = normal_branch(GRID, XFMR)
    checks["normal ODE"] = _ode_residual(lambda x: normal_mode_current(x, GRID, XFMR), r, l, t) <= 1e-6
    r, l = fault_branch(GRID, XFMR)
    t_f = 0.25
    tf = t_f + 1e-4 + t * 0.5
    checks["fault ODE"] = max(
        _ode_residual(lambda x: fault_mode_current(x, t_f, GRID, XFMR, c), r, l, tf) for c in (None, 4.2)
    ) <= 1e-6

    scn = sag_fault_scenario()
    res = run_scenario(scn)
    jumps = [abs(e.i_after - e.i_before) for e in res.events if e.kind == "mode"]
    checks["continuity"] = bool(jumps) and max(jumps) <= 1e-9

    dt = 1e-5
    tt = np.arange(4000) * dt
    x = 100 * np.sin(W * tt) + 10 * np.sin(3 * W * tt)
    checks["THD 0.100"] = abs(thd(x, dt, GRID.frequency) - 0.100) <= 1e-3
    y = 1.5 + x + 4 * np.sin(7 * W * tt + 0.3) + 0.5 * np.cos(49 * W * tt)
    checks["Parseval"] = abs(rms(y) ** 2 - np.sum(harmonic_rms(y, dt, GRID.frequency) ** 2)) / rms(y) ** 2 < 1e-9

    base = TABLE2.with_events(horizon=0.1)
    a = run_scenario(base, initial="zero").trace
    b = run_scenario(dataclasses.replace(base, dt=5e-6), initial="zero").trace
    ra = rms(a.i_line[a.window(0.1 - PERIOD, 0.1)])
    rb = rms(b.i_line[b.window(0.1 - PERIOD, 0.1)])
    checks["convergence"] = _rel(ra, rb) < 1e-3

    again = run_scenario(scn).trace
    checks["determinism"] = all(
        np.array_equal(getattr(again, c), getattr(res.trace, c))
        for c in ("time", "v_source", "v_pcc", "v_load", "i_line", "u_comp", "mode", "switches")
    )
    return all(checks.values()), [f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items()]


CRITERIA = [
    (1, "normal-mode current vs closed form", criterion_1),
    (2, "sag compensation", criterion_2),
    (3, "fault limiting", criterion_3),
    (4, "design round trips", criterion_4),
    (5, "stress and loss spot values", criterion_5),
    (6, "PCC dividers", criterion_6),
    (7, "topology table", criterion_7),
    (8, "property suites", criterion_8),
]


@pytest.mark.parametrize("number,title,check", CRITERIA, ids=[f"criterion_{n}" for n, _, _ in CRITERIA])
def test_criterion(number, title, check, capsys):
    ok, details = check()
    with capsys.disabled():
        print("\n" + _line(number, title, ok, details))
    assert ok, _line(number, title, ok, details)


if __name__ == "__main__":
    failed = 0
    for number, title, check in CRITERIA:
        ok, details = check()
        failed += not ok
        print(_line(number, title, ok, details))
    raise SystemExit(1 if failed else 0)
