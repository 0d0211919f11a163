"""Electrical parameter sets and closed-form circuit solutions.

All parameters are primary-referred SI quantities.  Voltages called
``v_m`` or ``*_peak`` are peak values; everything else is RMS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateImpedanceError, ValidationError

SQRT2 = math.sqrt(2.0)


def _require(cond, message):
    if not cond:
        raise ValidationError(message)


@dataclass(frozen=True)
class GridParams:
    v_source_rms: float
    frequency: float
    r_source_line: float
    l_source_line: float
    r_load: float
    l_load: float

    def __post_init__(self):
        _require(self.v_source_rms > 0, "v_source_rms must be > 0")
        _require(self.frequency > 0, "frequency must be > 0")
        for name in ("r_source_line", "l_source_line", "r_load", "l_load"):
            _require(getattr(self, name) >= 0, f"{name} must be >= 0")

    @property
    def v_m(self) -> float:
        return self.v_source_rms * SQRT2

    @property
    def omega(self) -> float:
        return 2.0 * math.pi * self.frequency

    @property
    def period(self) -> float:
        return 1.0 / self.frequency

    def source_impedance(self) -> PhasorImpedance:
        return PhasorImpedance(self.r_source_line, self.omega * self.l_source_line)

    def load_impedance(self) -> PhasorImpedance:
        return PhasorImpedance(self.r_load, self.omega * self.l_load)


@dataclass(frozen=True)
class TransformerParams:
    turns_ratio_a: float
    l_magnetizing: float
    l_leakage: float
    r_primary: float = 0.0
    r_secondary_referred: float = 0.0
    p_core: float = 0.0
    c_filter: float = 0.0

    def __post_init__(self):
        _require(self.turns_ratio_a > 0, "turns_ratio_a must be > 0")
        _require(self.l_leakage >= 0, "l_leakage must be >= 0")
        _require(
            self.l_magnetizing > self.l_leakage,
            "l_magnetizing must exceed l_leakage",
        )
        for name in ("r_primary", "r_secondary_referred", "p_core", "c_filter"):
            _require(getattr(self, name) >= 0, f"{name} must be >= 0")

    def leakage_impedance(self, omega: float) -> PhasorImpedance:
        return PhasorImpedance(0.0, omega * self.l_leakage)

    def limiting_impedance(self, omega: float) -> PhasorImpedance:
        """Impedance inserted by the open switch pair (the magnetizing branch)."""
        return PhasorImpedance(0.0, omega * self.l_magnetizing)


@dataclass(frozen=True)
class SwitchParams:
    v_ces: float
    v_on_drop: float
    v_dc: float

    def __post_init__(self):
        _require(self.v_ces > 0, "v_ces must be > 0")
        _require(self.v_on_drop >= 0, "v_on_drop must be >= 0")
        _require(self.v_dc > 0, "v_dc must be > 0")
        _require(
            self.v_dc <= 0.65 * self.v_ces,
            f"v_dc={self.v_dc} V exceeds the dc-link limit 0.65*v_ces={0.65 * self.v_ces} V",
        )


@dataclass(frozen=True)
class PhasorImpedance:
    resistance: float
    reactance: float

    @classmethod
    def from_complex(cls, z: complex) -> PhasorImpedance:
        return cls(z.real, z.imag)

    @property
    def complex(self) -> complex:
        return complex(self.resistance, self.reactance)

    @property
    def magnitude(self) -> float:
        return math.hypot(self.resistance, self.reactance)

    @property
    def phase(self) -> float:
        return math.atan2(self.reactance, self.resistance)

    def __add__(self, other: PhasorImpedance) -> PhasorImpedance:
        return PhasorImpedance(
            self.resistance + other.resistance, self.reactance + other.reactance
        )


@dataclass(frozen=True)
class SinusoidSolution:
    """``decay_amplitude*exp(-(t-onset)/tau) + amplitude*sin(omega*t - phase_lag)``."""

    amplitude: float
    phase_lag: float
    omega: float
    decay_amplitude: float = 0.0
    decay_time_constant: float = math.inf
    onset_time: float = 0.0

    def __post_init__(self):
        _require(self.amplitude >= 0, "amplitude must be >= 0")
        _require(
            self.decay_time_constant > 0 or self.decay_amplitude == 0,
            "decay_time_constant must be > 0",
        )

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = self.amplitude * np.sin(self.omega * t - self.phase_lag)
        if self.decay_amplitude != 0.0:
            out = out + self.decay_amplitude * np.exp(
                -(t - self.onset_time) / self.decay_time_constant
            )
        return out if out.ndim else float(out)


def total_impedance(r_total: float, l_total: float, omega: float) -> tuple[PhasorImpedance, float]:
    """Series R-L impedance at ``omega``; returns the impedance and its angle."""
    if r_total < 0 or l_total < 0:
        raise ValidationError("resistance and inductance must be >= 0")
    if omega <= 0:
        raise ValidationError("omega must be > 0")
    if r_total == 0 and l_total == 0:
        raise DegenerateImpedanceError("R = 0 and L = 0: zero series impedance")
    z = PhasorImpedance(r_total, omega * l_total)
    return z, z.phase


def normal_branch(grid: GridParams, xfmr: TransformerParams) -> tuple[float, float]:
    """(R, L) of the series path with the switch pair conducting."""
    r = grid.r_source_line + grid.r_load
    l = grid.l_source_line + grid.l_load + xfmr.l_leakage
    return r, l


def fault_branch(grid: GridParams, xfmr: TransformerParams) -> tuple[float, float]:
    """(R, L) of the series path with the switch pair open, leakage neglected."""
    r = grid.r_source_line + grid.r_load
    l = grid.l_source_line + grid.l_load + xfmr.l_magnetizing
    return r, l


def _steady(r: float, l: float, grid: GridParams) -> tuple[float, float]:
    z, phi = total_impedance(r, l, grid.omega)
    return grid.v_m / z.magnitude, phi


def normal_mode_solution(grid: GridParams, xfmr: TransformerParams) -> SinusoidSolution:
    r, l = normal_branch(grid, xfmr)
    amp, phi = _steady(r, l, grid)
    return SinusoidSolution(amp, phi, grid.omega)


def normal_mode_current(t, grid: GridParams, xfmr: TransformerParams):
    return normal_mode_solution(grid, xfmr)(t)


def fault_mode_solution(
    t_f: float,
    grid: GridParams,
    xfmr: TransformerParams,
    continuity_current: float | None = None,
) -> SinusoidSolution:
    """Fault-mode current after the switches open at ``t_f``.

    Without ``continuity_current`` the decay constant is the fixed ``-B``;
    with it, the constant is chosen so the solution equals that current at
    ``t_f``.
    """
    r, l = fault_branch(grid, xfmr)
    b, phi = _steady(r, l, grid)
    if continuity_current is None:
        a = -b
    else:
        a = continuity_current - b * math.sin(grid.omega * t_f - phi)
    tau = l / r if r > 0 else math.inf
    return SinusoidSolution(b, phi, grid.omega, a, tau, t_f)


def fault_mode_current(
    t,
    t_f: float,
    grid: GridParams,
    xfmr: TransformerParams,
    continuity_current: float | None = None,
):
    if np.any(np.asarray(t) < t_f):
        raise ValidationError("fault-mode current is defined only for t >= t_f")
    return fault_mode_solution(t_f, grid, xfmr, continuity_current)(t)


def _divide(numerator: complex, denominator: complex, v_source_rms: float) -> float:
    if denominator == 0:
        raise DegenerateImpedanceError("divider has zero total impedance")
    return abs(v_source_rms) * abs(numerator / denominator)


def pcc_voltage_normal(
    z_load: PhasorImpedance,
    z_source: PhasorImpedance,
    z_leakage: PhasorImpedance,
    v_source_rms: float,
) -> float:
    zl = z_load.complex
    return _divide(zl, zl + z_source.complex + z_leakage.complex, v_source_rms)


def pcc_voltage_fault(
    z_line: PhasorImpedance,
    z_fcl: PhasorImpedance,
    z_source: PhasorImpedance,
    z_leakage: PhasorImpedance,
    v_source_rms: float,
) -> float:
    num = z_line.complex + z_fcl.complex
    return _divide(num, num + z_source.complex + z_leakage.complex, v_source_rms)

