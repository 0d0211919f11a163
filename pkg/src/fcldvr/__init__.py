"""Single-phase FCL-DVR transient simulator and design toolkit."""

from .circuit import (
    GridParams,
    PhasorImpedance,
    SinusoidSolution,
    SwitchParams,
    TransformerParams,
    fault_mode_current,
    normal_mode_current,
    pcc_voltage_fault,
    pcc_voltage_normal,
    total_impedance,
)
from .errors import SimulationAborted, ValidationError
from .scenario import Scenario, load_scenario, parse_scenario, preset, serialize_scenario
from .sim import (
    ControllerConfig,
    FaultEvent,
    OperatingMode,
    SagEvent,
    SimState,
    WaveformTrace,
    compensation_reference,
    detect_mode,
    run_scenario,
    step,
)

__all__ = [
    "ControllerConfig", "FaultEvent", "GridParams", "OperatingMode", "PhasorImpedance",
    "SagEvent", "Scenario", "SimState", "SimulationAborted", "SinusoidSolution",
    "SwitchParams", "TransformerParams", "ValidationError", "WaveformTrace",
    "compensation_reference", "detect_mode", "fault_mode_current", "load_scenario",
    "normal_mode_current", "parse_scenario", "pcc_voltage_fault", "pcc_voltage_normal",
    "preset", "run_scenario", "serialize_scenario", "step", "total_impedance",
]
