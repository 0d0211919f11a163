import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fcldvr.analysis import (
    TOPOLOGIES,
    channel_rms,
    harmonic_rms,
    power_efficiency,
    power_loss,
    proposed_parameters,
    rms,
    rolling_rms,
    scenario_metrics,
    thd,
    topology_comparison,
)
from fcldvr.circuit import SwitchParams, TransformerParams
from fcldvr.errors import MissingEventLogError, MissingParameterError, ValidationError
from fcldvr.sim import OperatingMode, SagEvent, run_scenario

F0 = 50.0
DT = 1e-5
T = np.arange(2000) * DT  # one period


def sine(amp, h=1, phase=0.0, t=T):
    return amp * np.sin(2 * math.pi * F0 * h * t + phase)


class TestRms:
    def test_sine(self):
        assert rms(sine(311.13)) == pytest.approx(220.0, rel=1e-3)

    def test_constant(self):
        assert rms(np.full(17, -3.5)) == 3.5

    def test_empty(self):
        with pytest.raises(ValidationError):
            rms([])

    def test_concatenated_periods(self):
        x = sine(10.0) + sine(1.3, 3, 0.4)
        assert rms(np.tile(x, 7)) == pytest.approx(rms(x), rel=1e-9)

    def test_rolling(self):
        x = np.arange(10.0)
        r = rolling_rms(x, 3)
        assert r.size == 8
        assert r[4] == pytest.approx(rms(x[4:7]))

    def test_settled_trace(self, table2):
        tr = run_scenario(table2.with_events(horizon=0.1)).trace
        assert channel_rms(tr, "i_line", 0.06, 0.1) == pytest.approx(4.861, rel=5e-3)


class TestThd:
    def test_pure_sine(self):
        assert thd(sine(1.0), DT, F0) <= 1e-6

    def test_third_harmonic(self):
        assert thd(sine(100.0) + sine(10.0, 3), DT, F0) == pytest.approx(0.100, abs=1e-3)

    def test_non_integer_window(self):
        with pytest.raises(ValidationError, match="whole"):
            thd(sine(1.0)[:1500], DT, F0)

    def test_zero_fundamental(self):
        with pytest.raises(ValidationError):
            thd(sine(1.0, 2), DT, F0)

    def test_parseval(self):
        t = np.arange(6000) * DT
        x = 2.0 + sine(100.0, 1, 0.2, t) + sine(7.0, 3, 1.1, t) + sine(3.0, 11, 0.5, t) + sine(1.0, 47, 2.0, t)
        h = harmonic_rms(x, DT, F0)
        resid = rms(x) ** 2 - np.sum(h ** 2)
        assert abs(resid) / rms(x) ** 2 < 1e-9

    @settings(max_examples=50, deadline=None)
    @given(scale=st.floats(1e-3, 1e4), h3=st.floats(0.0, 0.5), h5=st.floats(0.0, 0.5))
    def test_scale_invariant(self, scale, h3, h5):
        x = sine(1.0) + sine(h3, 3) + sine(h5, 5, 0.7)
        assert thd(scale * x, DT, F0) == pytest.approx(thd(x, DT, F0), rel=1e-9, abs=1e-12)

    def test_compensation_reduces_distortion(self, table2):
        # a distorted sag: with the restorer the load sees close to the nominal wave
        ev = SagEvent(0.05, 0.15, 0.28, harmonics=((3, 0.1), (5, 0.05)))
        scn = table2.with_events(ev, horizon=0.16)
        on = run_scenario(scn).trace
        off = run_scenario(scn.with_events(ev, horizon=0.16, controller=type(scn.controller).for_frequency(
            50, compensation_enabled=False))).trace
        s = on.window(0.1, 0.14)
        assert thd(on.v_load[s], DT, F0) < 0.5 * thd(off.v_load[s], DT, F0)


XF = TransformerParams(5.0, 0.08, 0.0017, r_primary=0.05, r_secondary_referred=0.05, p_core=2.0)
SW = SwitchParams(1200.0, 2.0, 40.0)


class TestLoss:
    def test_normal_example(self):
        p = power_loss(OperatingMode.NORMAL, XF, SW, 4.861, 4.861, 4.861)
        assert p.p_total == pytest.approx(14.085, abs=1e-3)
        assert p.p_total == p.p_core + p.p_copper + p.p_switch

    def test_limiting_example(self):
        p = power_loss(OperatingMode.FAULT_LIMITING, XF, SW, 4.861, 4.861, 4.861)
        assert p.p_total == pytest.approx(4.363, abs=1e-3)
        assert p.p_switch == 0.0

    def test_zero_currents(self):
        assert power_loss(OperatingMode.COMPENSATION, XF, SW, 0, 0, 0).p_total == 2.0

    def test_negative_current(self):
        with pytest.raises(ValidationError):
            power_loss(OperatingMode.NORMAL, XF, SW, -1, 0, 0)

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(0, 100), min_size=3, max_size=3), st.integers(0, 2), st.floats(0, 10))
    def test_monotone(self, cur, idx, bump):
        up = list(cur)
        up[idx] += bump
        for mode in OperatingMode:
            assert power_loss(mode, XF, SW, *up).p_total >= power_loss(mode, XF, SW, *cur).p_total


class TestTopology:
    OP = {"i_pri": 4.861, "i_sec": 4.861, "I_line": 4.861}

    def test_counts_and_flags(self):
        rows = {e.label: e for e in TOPOLOGIES}
        assert list(rows) == ["[1]", "[23]", "[24]", "[22]", "[9]", "proposed"]
        p = rows["proposed"]
        assert (p.transformers, p.switches_3ph, p.dc_sources_3ph) == (1, 6, 3)
        assert rows["[9]"].loss_formula == "N/A"
        assert rows["[9]"].compensates_sag and rows["[9]"].limits_fault

    def test_proposed_matches_power_loss(self):
        rows = topology_comparison(self.OP, {"proposed": proposed_parameters(XF, SW)},
                                   entries=[TOPOLOGIES[-1], TOPOLOGIES[-2]])
        assert rows[0].loss == pytest.approx(14.085, abs=1e-3)
        assert rows[1].loss is None

    def test_missing_symbol_named(self):
        with pytest.raises(MissingParameterError, match=r"\[24\].*R_T2_series"):
            topology_comparison(self.OP, {"[24]": {"P_core": 1, "R_T1": 0.1, "V_igbt": 2}},
                                entries=[TOPOLOGIES[2]])

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(0, 50), min_size=3, max_size=3))
    def test_proposed_equivalence(self, cur):
        op = dict(zip(("i_pri", "i_sec", "I_line"), cur))
        (row,) = topology_comparison(op, {"proposed": proposed_parameters(XF, SW)}, entries=[TOPOLOGIES[-1]])
        ref = power_loss(OperatingMode.NORMAL, XF, SW, *cur).p_total
        assert row.loss == pytest.approx(ref, rel=1e-12, abs=1e-12)


class TestMetrics:
    def test_sag_fault(self, sag_fault_run):
        from fcldvr.analysis import bolted_fault_peak, nominal_load_voltage
        scn, res = sag_fault_run
        m = scenario_metrics(res.trace, res.events, 220.0, nominal_load_voltage(scn.grid, scn.transformer),
                             50.0, baseline_peak=bolted_fault_peak(scn.grid, scn.transformer, False))
        assert m.sag_depth == pytest.approx(0.28, abs=0.01)
        assert m.compensation_error < 0.05
        assert m.limited_amplitude == pytest.approx(12.05, rel=0.02)
        assert m.limiting_ratio == pytest.approx(37, rel=0.05)
        assert m.max_fault_current >= m.limited_amplitude

    def test_quiet(self, table2):
        res = run_scenario(table2.with_events(horizon=0.1))
        m = scenario_metrics(res.trace, res.events, 220.0, 219.256, 50.0)
        assert m.sag_depth == pytest.approx(0.0, abs=1e-6)
        assert m.compensation_error is None and m.limiting_ratio is None

    def test_missing_log(self, sag_fault_run):
        with pytest.raises(MissingEventLogError):
            scenario_metrics(sag_fault_run[1].trace, None, 220.0, 219.0, 50.0)

    def test_efficiency(self, table2):
        tr = run_scenario(table2.with_events(horizon=0.1)).trace
        eta = power_efficiency(tr, 0.06, 0.1)
        assert 0.99 < eta < 1.0
