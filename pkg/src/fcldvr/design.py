"""Sizing and rating calculations for the series transformer, the magnetizing
inductance, the dc link and the switch pair."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .circuit import _require
from .errors import ModeError, ValidationError
from .sim import OperatingMode

DC_LINK_FRACTION = 0.65


@dataclass(frozen=True)
class FaultLimitSpec:
    """Design targets.

    ``fault_multiple_lambda_i`` is the permitted fault current as a multiple
    of rated load current; ``sag_ratio_lambda_v`` is the deepest sag to be
    compensated, as a fraction of line voltage.
    """

    fault_multiple_lambda_i: float
    load_va: float
    sag_ratio_lambda_v: float

    def __post_init__(self):
        _require(self.fault_multiple_lambda_i > 1, "fault_multiple_lambda_i must be > 1")
        _require(self.load_va > 0, "load_va must be > 0")
        _require(0 < self.sag_ratio_lambda_v < 1, "sag_ratio_lambda_v must be in (0, 1)")


def _positive(**kw):
    for name, value in kw.items():
        if not value > 0:
            raise ValidationError(f"{name} must be > 0, got {value!r}")


def rated_load_current(load_va: float, v_source_rms: float) -> float:
    _positive(load_va=load_va, v_source_rms=v_source_rms)
    return load_va / v_source_rms


def size_magnetizing_inductance(v_source_rms, omega, lambda_i, rated_current) -> float:
    """Largest L_m that still lets ``lambda_i`` times rated current flow in a fault."""
    _positive(v_source_rms=v_source_rms, omega=omega, rated_current=rated_current)
    if not lambda_i > 1:
        raise ValidationError("lambda_i must be > 1")
    return v_source_rms / (omega * lambda_i * rated_current)


def limited_fault_current(v_source_rms, omega, l_magnetizing) -> float:
    """RMS fault current when the magnetizing reactance dominates the loop."""
    _positive(v_source_rms=v_source_rms, omega=omega, l_magnetizing=l_magnetizing)
    return v_source_rms / (omega * l_magnetizing)


def dc_link_limit(v_ces: float) -> float:
    _positive(v_ces=v_ces)
    return DC_LINK_FRACTION * v_ces


def dc_link_ok(v_dc: float, v_ces: float) -> bool:
    return v_dc <= dc_link_limit(v_ces)


def turns_ratio_for_sag(lambda_v, v_line_rms, v_ac_inv) -> float:
    _positive(lambda_v=lambda_v, v_line_rms=v_line_rms, v_ac_inv=v_ac_inv)
    return lambda_v * v_line_rms / v_ac_inv


def series_transformer_ratio(
    v_source_rms, lambda_i, rated_current, omega, l_secondary, squared=False
) -> float:
    """Series-transformer ratio ``k`` with ``U_S / (k^2 w L_sec) = lambda * I``.

    ``squared=True`` returns ``k^2``, the variant of this formula written
    without the square root.  It does not satisfy the identity above and is
    kept only for comparison.
    """
    _positive(v_source_rms=v_source_rms, lambda_i=lambda_i, rated_current=rated_current,
              omega=omega, l_secondary=l_secondary)
    k2 = v_source_rms / (lambda_i * rated_current * omega * l_secondary)
    return k2 if squared else math.sqrt(k2)


def transformer_capacity(lambda_i, rated_current, v_source_rms) -> float:
    _positive(lambda_i=lambda_i, rated_current=rated_current, v_source_rms=v_source_rms)
    return lambda_i * rated_current * v_source_rms


@dataclass(frozen=True)
class SwitchStress:
    positive_half: float
    negative_half: float

    @property
    def rating(self) -> float:
        return self.positive_half


def switch_stress(mode: OperatingMode, alpha=None, v_m_peak=None, a=None, v_dc=None) -> SwitchStress:
    """Blocking voltage on each switch of the pair.

    While limiting, the two half cycles differ by the reflected line-voltage
    swing ``alpha*V_m/a``; while compensating the pair sees twice the dc link.
    """
    if mode is OperatingMode.COMPENSATION:
        _positive(v_dc=v_dc)
        return SwitchStress(2.0 * v_dc, 2.0 * v_dc)
    if mode is OperatingMode.FAULT_LIMITING:
        _positive(v_m_peak=v_m_peak, a=a, v_dc=v_dc)
        if alpha is None or not 0 <= alpha <= 1:
            raise ValidationError("alpha must be in [0, 1]")
        swing = alpha * v_m_peak / a
        return SwitchStress(swing + v_dc, -swing + v_dc)
    raise ModeError(f"no stress rating case for {mode.name}")


@dataclass(frozen=True)
class DesignReport:
    rated_current: float
    l_m_max: float
    dc_link_max: float
    turns_ratio: float
    series_ratio_k: float
    transformer_va: float
    stress_fault_pos: float
    stress_fault_neg: float
    stress_comp: float

    UNITS = {
        "rated_current": "A", "l_m_max": "H", "dc_link_max": "V", "turns_ratio": "",
        "series_ratio_k": "", "transformer_va": "VA", "stress_fault_pos": "V",
        "stress_fault_neg": "V", "stress_comp": "V",
    }


def design_report(
    limit: FaultLimitSpec,
    v_source_rms: float,
    frequency: float,
    v_ac_inv: float,
    l_secondary: float,
    v_ces: float,
    v_dc: float,
    alpha: float | None = None,
) -> DesignReport:
    """Run the whole sizing chain for one design point.

    ``alpha`` (line-voltage swing seen while limiting) defaults to the sag
    ratio of ``limit``.
    """
    omega = 2.0 * math.pi * frequency
    lam = limit.fault_multiple_lambda_i
    i_rated = rated_load_current(limit.load_va, v_source_rms)
    a = turns_ratio_for_sag(limit.sag_ratio_lambda_v, v_source_rms, v_ac_inv)
    alpha = limit.sag_ratio_lambda_v if alpha is None else alpha
    fault = switch_stress(OperatingMode.FAULT_LIMITING, alpha, v_source_rms * math.sqrt(2), a, v_dc)
    return DesignReport(
        rated_current=i_rated,
        l_m_max=size_magnetizing_inductance(v_source_rms, omega, lam, i_rated),
        dc_link_max=dc_link_limit(v_ces),
        turns_ratio=a,
        series_ratio_k=series_transformer_ratio(v_source_rms, lam, i_rated, omega, l_secondary),
        transformer_va=transformer_capacity(lam, i_rated, v_source_rms),
        stress_fault_pos=fault.positive_half,
        stress_fault_neg=fault.negative_half,
        stress_comp=switch_stress(OperatingMode.COMPENSATION, v_dc=v_dc).rating,
    )
