"""Time-domain simulation of the switched FCL-DVR network.

The network is a source EMF feeding a series R-L path (source and line),
the primary of the series transformer, and a load R-L at the PCC node.
An optional shunt fault resistance can parallel the load.  Each operating
mode makes the circuit linear, so every step is a trapezoidal update of a
small linear system whose matrices are cached per topology.

States are the line current, the load-branch current (equal to the line
current unless a fault shunts the PCC) and the secondary filter-capacitor
voltage.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Sequence, Union

import numpy as np

from .circuit import GridParams, SwitchParams, TransformerParams, _require
from .errors import OverlappingEventsError, SimulationAborted, StepSizeError, ValidationError

if TYPE_CHECKING:
    from .scenario import Scenario


class OperatingMode(enum.Enum):
    NORMAL = "N"
    COMPENSATION = "C"
    FAULT_LIMITING = "F"

    @property
    def code(self) -> str:
        return self.value

    @classmethod
    def from_code(cls, code: str) -> OperatingMode:
        return cls(code)


@dataclass(frozen=True)
class SagEvent:
    """Source amplitude scaled by ``1 - depth_alpha`` over ``[start, end)``.

    ``harmonics`` holds ``(order, fraction)`` pairs added to the sagged
    source, each fraction relative to the sagged fundamental.
    """

    start: float
    end: float
    depth_alpha: float
    harmonics: tuple[tuple[int, float], ...] = ()

    def __post_init__(self):
        _require(self.end > self.start, "sag end must be after start")
        _require(0 < self.depth_alpha < 1, "sag depth_alpha must be in (0, 1)")
        for order, frac in self.harmonics:
            _require(int(order) == order and order >= 2, "harmonic order must be an integer >= 2")
            _require(frac >= 0, "harmonic fraction must be >= 0")

    def active(self, t: float) -> bool:
        return _within(t, self.start, self.end)


@dataclass(frozen=True)
class FaultEvent:
    start: float
    end: float
    fault_resistance: float = 0.0

    def __post_init__(self):
        _require(self.end > self.start, "fault end must be after start")
        _require(self.fault_resistance >= 0, "fault_resistance must be >= 0")

    def active(self, t: float) -> bool:
        return _within(t, self.start, self.end)


Event = Union[SagEvent, FaultEvent]

# absorbs k*dt rounding so grid-aligned event edges land on the intended step
_T_EPS = 1e-12


def _within(t: float, start: float, end: float) -> bool:
    return start - _T_EPS <= t < end - _T_EPS


@dataclass(frozen=True)
class ControllerConfig:
    sag_enter_pu: float = 0.90
    sag_exit_pu: float = 0.95
    overcurrent_multiple: float = 2.0
    # Drop-out level for leaving FaultLimiting, as a multiple of rated peak.
    rearm_multiple: float = 1.2
    rearm_hold: float = 0.02
    rms_window: float = 0.01
    compensation_enabled: bool = True
    limiter_enabled: bool = True

    def __post_init__(self):
        _require(
            0 < self.sag_enter_pu < self.sag_exit_pu <= 1,
            "need 0 < sag_enter_pu < sag_exit_pu <= 1",
        )
        _require(self.overcurrent_multiple > 1, "overcurrent_multiple must be > 1")
        _require(
            0 < self.rearm_multiple <= self.overcurrent_multiple,
            "need 0 < rearm_multiple <= overcurrent_multiple",
        )
        _require(self.rearm_hold >= 0, "rearm_hold must be >= 0")
        _require(self.rms_window > 0, "rms_window must be > 0")

    @classmethod
    def for_frequency(cls, frequency: float, **overrides) -> ControllerConfig:
        """Defaults scaled to the grid: one period of hold, half a period of RMS window."""
        kw = {"rearm_hold": 1.0 / frequency, "rms_window": 0.5 / frequency}
        kw.update(overrides)
        return cls(**kw)


@dataclass(frozen=True)
class RatedValues:
    v_nominal_rms: float
    i_peak: float


@dataclass(frozen=True)
class SimState:
    time: float
    i_line: float
    v_cap: float = 0.0
    mode: OperatingMode = OperatingMode.NORMAL
    u_comp: float = 0.0
    i_load: float | None = None

    def __post_init__(self):
        if self.i_load is None:
            object.__setattr__(self, "i_load", self.i_line)
        if self.mode is OperatingMode.NORMAL and self.u_comp != 0.0:
            raise ValidationError("u_comp must be 0 in Normal mode")

    @property
    def switches_on(self) -> bool:
        return self.mode is not OperatingMode.FAULT_LIMITING


@dataclass
class WaveformTrace:
    dt: float
    time: np.ndarray
    v_source: np.ndarray
    v_pcc: np.ndarray
    v_load: np.ndarray
    i_line: np.ndarray
    u_comp: np.ndarray
    mode: np.ndarray  # single-character mode codes
    switches: np.ndarray  # bool

    CHANNELS = ("v_source", "v_pcc", "v_load", "i_line", "u_comp")

    def __len__(self):
        return len(self.time)

    def channel(self, name: str) -> np.ndarray:
        if name not in self.CHANNELS:
            raise ValidationError(f"unknown channel {name!r}; expected one of {self.CHANNELS}")
        return getattr(self, name)

    def window(self, start: float, end: float) -> slice:
        """Index slice of samples with ``start <= t < end`` (grid-aligned)."""
        lo = int(math.ceil(start / self.dt - 1e-9))
        hi = int(math.ceil(end / self.dt - 1e-9))
        return slice(max(lo, 0), min(max(hi, 0), len(self.time)))


@dataclass(frozen=True)
class EventRecord:
    time: float
    kind: str
    detail: str = ""
    i_before: float | None = None
    i_after: float | None = None


@dataclass
class SimulationResult:
    trace: WaveformTrace
    events: list[EventRecord]
    rated: RatedValues
    saturated_steps: int = 0

    def mode_intervals(self, mode: OperatingMode) -> list[tuple[float, float]]:
        return mode_intervals(self.trace, mode)


def mode_intervals(trace: WaveformTrace, mode: OperatingMode) -> list[tuple[float, float]]:
    """Time intervals ``[start, end)`` over which ``trace`` reports ``mode``."""
    flags = trace.mode == mode.code
    out = []
    n = len(flags)
    k = 0
    while k < n:
        if flags[k]:
            j = k
            while j < n and flags[j]:
                j += 1
            out.append((float(trace.time[k]), float(trace.time[j - 1] + trace.dt)))
            k = j
        else:
            k += 1
    return out


# -- source and controller ---------------------------------------------------


def source_voltage(t: float, grid: GridParams, events: Sequence[Event] = ()) -> float:
    """Instantaneous source EMF including any active sag."""
    wt = grid.omega * t
    for ev in events:
        if isinstance(ev, SagEvent) and ev.active(t):
            v = math.sin(wt)
            for order, frac in ev.harmonics:
                v += frac * math.sin(order * wt)
            return grid.v_m * (1.0 - ev.depth_alpha) * v
    return grid.v_m * math.sin(wt)


def compensation_reference(
    v_source_instant: float,
    nominal_waveform_instant: float,
    xfmr: TransformerParams,
    switches: SwitchParams,
) -> tuple[float, bool]:
    """Secondary inverter command restoring the nominal waveform.

    Returns ``(command, saturated)``; the command is clamped to the dc-link
    voltage and ``saturated`` is set when the clamp engages.
    """
    cmd = (nominal_waveform_instant - v_source_instant) / xfmr.turns_ratio_a
    if cmd > switches.v_dc:
        return switches.v_dc, True
    if cmd < -switches.v_dc:
        return -switches.v_dc, True
    return cmd, False


def detect_mode(
    state: SimState,
    v_rms: float,
    rated: RatedValues,
    cfg: ControllerConfig,
    time_below_rearm: float = math.inf,
) -> OperatingMode:
    """Controller decision for the next step.

    ``v_rms`` is the rolling RMS of the supply-side voltage.
    ``time_below_rearm`` is how long ``|i_line|`` has stayed below the
    drop-out level; it only matters while limiting.
    """
    if cfg.limiter_enabled:
        if abs(state.i_line) > cfg.overcurrent_multiple * rated.i_peak:
            return OperatingMode.FAULT_LIMITING
        if state.mode is OperatingMode.FAULT_LIMITING and time_below_rearm < cfg.rearm_hold:
            return OperatingMode.FAULT_LIMITING
    if cfg.compensation_enabled:
        if state.mode is OperatingMode.COMPENSATION:
            if v_rms < cfg.sag_exit_pu * rated.v_nominal_rms:
                return OperatingMode.COMPENSATION
        elif v_rms < cfg.sag_enter_pu * rated.v_nominal_rms:
            return OperatingMode.COMPENSATION
    return OperatingMode.NORMAL


# -- linear network ----------------------------------------------------------

_I, _IL, _VC = 0, 1, 2


@dataclass(frozen=True)
class _Network:
    """State-space form ``x' = A x + B [v_src, v_cmd]`` of one topology."""

    A: tuple  # nested float tuples, row-major
    B: tuple
    P: tuple  # trapezoidal step: x1 = P x0 + Q (w0 + w1)
    Q: tuple
    faulted: bool
    filter_state: bool


def _filter_tau(xfmr: TransformerParams) -> float:
    # C_1 charges through the secondary winding resistance (secondary side).
    return xfmr.r_secondary_referred / xfmr.turns_ratio_a**2 * xfmr.c_filter


def _series_rl(grid, xfmr, mode):
    r = grid.r_source_line + xfmr.r_primary
    l = grid.l_source_line + xfmr.l_leakage
    if mode is OperatingMode.FAULT_LIMITING:
        l += xfmr.l_magnetizing
    else:
        r += xfmr.r_secondary_referred
    return r, l


@lru_cache(maxsize=64)
def _network(grid, xfmr, switches, mode, fault_r, dt) -> _Network:
    r_s, l_s = _series_rl(grid, xfmr, mode)
    a = xfmr.turns_ratio_a
    tau = _filter_tau(xfmr)
    comp = mode is OperatingMode.COMPENSATION
    filt = comp and tau > 0
    A = np.zeros((3, 3))
    B = np.zeros((3, 2))
    if fault_r is None:
        l_tot = l_s + grid.l_load
        A[_I, _I] = -(r_s + grid.r_load) / l_tot
        B[_I, 0] = 1.0 / l_tot
        inj = (_I, l_tot)
    else:
        A[_I, _I] = -(r_s + fault_r) / l_s
        A[_I, _IL] = fault_r / l_s
        A[_IL, _I] = fault_r / grid.l_load
        A[_IL, _IL] = -(fault_r + grid.r_load) / grid.l_load
        B[_I, 0] = 1.0 / l_s
        inj = (_I, l_s)
    if filt:
        A[inj[0], _VC] = a / inj[1]
        A[_VC, _VC] = -1.0 / tau
        B[_VC, 1] = 1.0 / tau
    elif comp:
        B[inj[0], 1] = a / inj[1]
    h = dt / 2.0
    lhs = np.eye(3) - h * A
    P = np.linalg.solve(lhs, np.eye(3) + h * A)
    Q = np.linalg.solve(lhs, h * B)
    return _Network(
        tuple(map(tuple, A.tolist())), tuple(map(tuple, B.tolist())),
        tuple(map(tuple, P.tolist())), tuple(map(tuple, Q.tolist())),
        fault_r is not None, filt,
    )


def _check_network(grid: GridParams, xfmr: TransformerParams):
    if grid.l_source_line + xfmr.l_leakage <= 0:
        raise ValidationError("simulation needs l_source_line + l_leakage > 0")
    if grid.l_load <= 0:
        raise ValidationError("simulation needs l_load > 0")


def _check_dt(dt: float, grid: GridParams):
    if not dt > 0 or dt > 1.0 / (200.0 * grid.frequency) * (1 + 1e-12):
        raise StepSizeError(
            f"dt={dt!r} s outside (0, 1/(200 f)] = (0, {1.0 / (200.0 * grid.frequency)!r}]"
        )


def _active_fault(events: Sequence[Event], t: float) -> FaultEvent | None:
    for ev in events:
        if isinstance(ev, FaultEvent) and ev.active(t):
            return ev
    return None


def _merge_load_current(i_line, i_load, grid, xfmr, mode):
    """Flux-conserving merge of line and load currents when a fault clears."""
    _, l_s = _series_rl(grid, xfmr, mode)
    return (l_s * i_line + grid.l_load * i_load) / (l_s + grid.l_load)


class _Stepper:
    """Advances the network one step; shared by :func:`step` and the run loop."""

    def __init__(self, grid, xfmr, switches, events, dt):
        _check_network(grid, xfmr)
        _check_dt(dt, grid)
        self.grid, self.xfmr, self.switches = grid, xfmr, switches
        self.events = tuple(events)
        self.dt = dt
        self.last_saturated = False

    def inputs(self, t, mode):
        v = source_voltage(t, self.grid, self.events)
        self.last_saturated = False
        if mode is not OperatingMode.COMPENSATION:
            return v, 0.0
        nominal = self.grid.v_m * math.sin(self.grid.omega * t)
        cmd, self.last_saturated = compensation_reference(v, nominal, self.xfmr, self.switches)
        return v, cmd

    def advance(self, x, t0, t1, mode, fault_r, w0=None):
        """Returns the new state vector, inputs at ``t1`` and the network used."""
        net = _network(self.grid, self.xfmr, self.switches, mode, fault_r, self.dt)
        if w0 is None:
            w0 = self.inputs(t0, mode)
        w1 = self.inputs(t1, mode)
        s0, s1 = w0[0] + w1[0], w0[1] + w1[1]
        P, Q = net.P, net.Q
        x1 = [
            P[r][0] * x[0] + P[r][1] * x[1] + P[r][2] * x[2] + Q[r][0] * s0 + Q[r][1] * s1
            for r in range(3)
        ]
        if not net.faulted:
            x1[_IL] = x1[_I]
        if not (math.isfinite(x1[0]) and math.isfinite(x1[1]) and math.isfinite(x1[2])):
            raise SimulationAborted(f"non-finite state at t={t1!r} s")
        x1[_VC] = self._cap_voltage(x1, w1, net, mode)
        return x1, w1, net

    def di_dt(self, x, w, net):
        a, b = net.A[_I], net.B[_I]
        return a[0] * x[0] + a[1] * x[1] + a[2] * x[2] + b[0] * w[0] + b[1] * w[1]

    def _cap_voltage(self, x, w, net, mode):
        if mode is OperatingMode.COMPENSATION:
            return x[_VC] if net.filter_state else w[1]
        if mode is OperatingMode.FAULT_LIMITING:
            # Secondary sees the magnetizing voltage through the turns ratio.
            return self.xfmr.l_magnetizing * self.di_dt(x, w, net) / self.xfmr.turns_ratio_a
        return 0.0

    def outputs(self, x, w, net, mode, fault_r):
        """(v_pcc, u_comp) at a sample."""
        u = self.xfmr.turns_ratio_a * x[_VC] if mode is OperatingMode.COMPENSATION else 0.0
        if fault_r is not None:
            v_pcc = fault_r * (x[_I] - x[_IL])
        else:
            v_pcc = self.grid.r_load * x[_I] + self.grid.l_load * self.di_dt(x, w, net)
        return v_pcc, u


def step(
    state: SimState,
    grid: GridParams,
    xfmr: TransformerParams,
    switches: SwitchParams,
    events: Sequence[Event],
    dt: float,
) -> SimState:
    """Advance ``state`` by one trapezoidal step, holding its mode.

    A fault active at ``state.time`` shunts the PCC for the whole step.  If
    no fault is active and the line and load currents differ (a fault has
    just cleared) they are merged first, conserving flux.
    """
    st = _Stepper(grid, xfmr, switches, events, dt)
    fault = _active_fault(events, state.time)
    fault_r = fault.fault_resistance if fault else None
    i_load = state.i_load
    i_line = state.i_line
    if fault is None and i_load != i_line:
        i_line = i_load = _merge_load_current(i_line, i_load, grid, xfmr, state.mode)
    x = [i_line, i_load, state.v_cap]
    t1 = state.time + dt
    x1, w1, net = st.advance(x, state.time, t1, state.mode, fault_r)
    _, u = st.outputs(x1, w1, net, state.mode, fault_r)
    return SimState(t1, x1[_I], x1[_VC], state.mode, u, x1[_IL])


# -- scenario runner ----------------------------------------------------------


def validate_events(events: Sequence[Event]) -> tuple[Event, ...]:
    evs = sorted(events, key=lambda e: e.start)
    for prev, nxt in zip(evs, evs[1:]):
        if nxt.start < prev.end:
            raise OverlappingEventsError(
                f"events overlap: [{prev.start}, {prev.end}) and [{nxt.start}, {nxt.end})"
            )
    return tuple(evs)


def rated_values(grid: GridParams, xfmr: TransformerParams) -> RatedValues:
    """Nominal supply RMS and the steady normal-mode peak line current."""
    r_s, l_s = _series_rl(grid, xfmr, OperatingMode.NORMAL)
    z = complex(r_s + grid.r_load, grid.omega * (l_s + grid.l_load))
    return RatedValues(grid.v_source_rms, grid.v_m / abs(z))


def _steady_initial_current(grid, xfmr) -> float:
    r_s, l_s = _series_rl(grid, xfmr, OperatingMode.NORMAL)
    z = complex(r_s + grid.r_load, grid.omega * (l_s + grid.l_load))
    return grid.v_m / abs(z) * math.sin(-math.atan2(z.imag, z.real))


def run_scenario(scenario: Scenario, initial: str = "steady") -> SimulationResult:
    """Simulate ``scenario`` over its horizon.

    ``initial`` is ``"steady"`` (start on the periodic normal-mode solution)
    or ``"zero"`` (all states zero).
    """
    grid, xfmr, sw, cfg = scenario.grid, scenario.transformer, scenario.switches, scenario.controller
    events = validate_events(scenario.events)
    dt = scenario.dt
    st = _Stepper(grid, xfmr, sw, events, dt)
    rated = rated_values(grid, xfmr)
    n = int(round(scenario.horizon / dt))

    cols = {k: np.empty(n + 1) for k in ("v_source", "v_pcc", "v_load", "i_line", "u_comp")}
    modes = np.empty(n + 1, dtype="<U1")
    switches_col = np.empty(n + 1, dtype=bool)
    log: list[EventRecord] = []

    if initial == "steady":
        i0 = _steady_initial_current(grid, xfmr)
    elif initial == "zero":
        i0 = 0.0
    else:
        raise ValidationError(f"unknown initial condition {initial!r}")
    x = [i0, i0, 0.0]
    mode = OperatingMode.NORMAL

    # rolling RMS of the supply voltage, pre-filled with nominal history
    n_w = max(1, int(round(cfg.rms_window / dt)))
    buf = [(grid.v_m * math.sin(-grid.omega * k * dt)) ** 2 for k in range(n_w, 0, -1)]
    sq_sum = math.fsum(buf)
    head = n_w - 1
    below = math.inf
    i_rearm = cfg.rearm_multiple * rated.i_peak

    w = st.inputs(0.0, mode)
    fault = _active_fault(events, 0.0)
    fault_r = fault.fault_resistance if fault else None
    net = _network(grid, xfmr, sw, mode, fault_r, dt)
    x[_VC] = st._cap_voltage(x, w, net, mode)

    def record(k, x, w, net, mode, fault_r):
        v_pcc, u = st.outputs(x, w, net, mode, fault_r)
        cols["v_source"][k] = w[0]
        cols["v_pcc"][k] = v_pcc
        cols["v_load"][k] = v_pcc
        cols["i_line"][k] = x[_I]
        cols["u_comp"][k] = u
        modes[k] = mode.code
        switches_col[k] = mode is not OperatingMode.FAULT_LIMITING

    record(0, x, w, net, mode, fault_r)
    boundaries = sorted({(e.start, "start", e) for e in events} | {(e.end, "end", e) for e in events},
                        key=lambda b: b[0])
    b_idx = 0
    sat_steps = 0
    prev_sat = False
    was_faulted = fault is not None

    for k in range(n):
        t0 = k * dt
        t1 = (k + 1) * dt
        while b_idx < len(boundaries) and boundaries[b_idx][0] <= t0 + _T_EPS:
            bt, which, ev = boundaries[b_idx]
            kind = "sag" if isinstance(ev, SagEvent) else "fault"
            log.append(EventRecord(t0, f"{kind}_{which}", f"scheduled at {bt!r} s"))
            b_idx += 1

        fault = _active_fault(events, t0)
        fault_r = fault.fault_resistance if fault else None
        if was_faulted and fault is None:
            merged = _merge_load_current(x[_I], x[_IL], grid, xfmr, mode)
            log.append(EventRecord(t0, "fault_cleared", "line/load currents merged", x[_I], merged))
            x[_I] = x[_IL] = merged
        was_faulted = fault is not None

        # controller measurement at t0
        v_now = w[0]
        head = (head + 1) % n_w
        sq_sum += v_now * v_now - buf[head]
        buf[head] = v_now * v_now
        v_rms = math.sqrt(max(sq_sum, 0.0) / n_w)
        if abs(x[_I]) < i_rearm:
            below = below + dt if math.isfinite(below) else 0.0
        else:
            below = 0.0
        state = SimState(t0, x[_I], x[_VC], mode, cols["u_comp"][k], x[_IL])
        new_mode = detect_mode(state, v_rms, rated, cfg, below)
        if new_mode is not mode:
            if new_mode is OperatingMode.FAULT_LIMITING:
                below = 0.0
            i_before = x[_I]
            if new_mode is OperatingMode.NORMAL:
                x[_VC] = 0.0
            log.append(
                EventRecord(t0, "mode", f"{mode.code}->{new_mode.code}", i_before, x[_I])
            )
            mode = new_mode
            w = st.inputs(t0, mode)

        x, w, net = st.advance(x, t0, t1, mode, fault_r, w0=w)
        if st.last_saturated:
            if not prev_sat:
                log.append(EventRecord(t1, "saturation", "inverter command clamped to v_dc"))
            sat_steps += 1
        prev_sat = st.last_saturated
        record(k + 1, x, w, net, mode, fault_r)

    time = np.arange(n + 1) * dt
    trace = WaveformTrace(
        dt, time, cols["v_source"], cols["v_pcc"], cols["v_load"], cols["i_line"],
        cols["u_comp"], modes, switches_col,
    )
    return SimulationResult(trace, log, rated, sat_steps)
