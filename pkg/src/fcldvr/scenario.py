"""Scenario documents, unit handling and the built-in parameter presets.

A scenario document is line oriented::

    # comments start with '#'
    preset = table2
    horizon = 400 ms
    grid.r_load = 45 ohm

    [event]
    kind = sag
    start = 100 ms
    end = 200 ms
    depth = 28 %

Every dimensional quantity needs a unit suffix; dimensionless ones take no
unit, ``pu`` or ``%``.  Keys not listed in :data:`SCENARIO_KEYS` or
:data:`EVENT_KEYS` are rejected.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, fields, replace

from .circuit import GridParams, SwitchParams, TransformerParams, _require
from .errors import ScenarioParseError, UnitError, ValidationError
from .sim import ControllerConfig, FaultEvent, SagEvent, _check_dt, _check_network, validate_events

# decimal exponents; negative ones are applied by division so "350 ms" is exactly 0.35
_PREFIX = {"G": 9, "M": 6, "k": 3, "m": -3, "u": -6, "µ": -6, "n": -9, "p": -12}
_NUMBER = re.compile(r"^([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*(\S*)$")
_BASE = {"V": "V", "A": "A", "ohm": "ohm", "Ω": "ohm", "H": "H", "F": "F",
         "Hz": "Hz", "s": "s", "W": "W", "VA": "VA"}
_DIMENSIONLESS = {"": 1.0, "pu": 1.0, "%": 0.01}


def parse_quantity(text: str, dimension: str) -> float:
    """Parse ``"<number> [unit]"`` into base SI units of ``dimension``.

    ``dimension`` is one of the base unit names (``"V"``, ``"H"``, ...) or
    ``""`` for dimensionless values.
    """
    text = text.strip()
    if dimension == "" and ":" in text:
        lhs, _, rhs = text.partition(":")
        try:
            return float(rhs) / float(lhs)
        except (ValueError, ZeroDivisionError):
            raise UnitError(f"bad ratio {text!r}") from None
    m = _NUMBER.match(text)
    if not m:
        raise UnitError(f"expected '<number> <unit>', got {text!r}")
    value = float(m.group(1))
    unit = m.group(2)
    if dimension == "":
        if unit not in _DIMENSIONLESS:
            raise UnitError(f"dimensionless quantity cannot carry unit {unit!r}")
        return value * _DIMENSIONLESS[unit]
    if not unit:
        raise UnitError(f"missing unit (expected {dimension})")
    exp, base = _split_unit(unit)
    if base != dimension:
        raise UnitError(f"unit {unit!r} is not a {dimension} unit")
    return value * 10.0**exp if exp >= 0 else value / 10.0**-exp


def _split_unit(unit: str) -> tuple[int, str]:
    if unit in _BASE:
        return 0, _BASE[unit]
    if unit[:1] in _PREFIX and unit[1:] in _BASE:
        return _PREFIX[unit[0]], _BASE[unit[1:]]
    raise UnitError(f"unknown unit {unit!r}")


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("on", "true", "yes", "1"):
        return True
    if t in ("off", "false", "no", "0"):
        return False
    raise ValidationError(f"expected on/off, got {text!r}")


def _parse_harmonics(text: str) -> tuple[tuple[int, float], ...]:
    out = []
    for item in filter(None, (p.strip() for p in text.split(","))):
        order, sep, frac = item.partition(":")
        if not sep:
            raise ValidationError(f"harmonic entry {item!r} must be 'order:fraction'")
        try:
            out.append((int(order), float(frac)))
        except ValueError:
            raise ValidationError(f"bad harmonic entry {item!r}") from None
    return tuple(out)


# key -> (section, field, dimension); dimension None marks a boolean
SCENARIO_KEYS: dict[str, tuple[str, str, str | None]] = {
    "horizon": ("", "horizon", "s"),
    "dt": ("", "dt", "s"),
    "load_va": ("", "load_va", "VA"),
    "grid.v_source_rms": ("grid", "v_source_rms", "V"),
    "grid.frequency": ("grid", "frequency", "Hz"),
    "grid.r_source_line": ("grid", "r_source_line", "ohm"),
    "grid.l_source_line": ("grid", "l_source_line", "H"),
    "grid.r_load": ("grid", "r_load", "ohm"),
    "grid.l_load": ("grid", "l_load", "H"),
    "transformer.turns_ratio": ("transformer", "turns_ratio_a", ""),
    "transformer.l_magnetizing": ("transformer", "l_magnetizing", "H"),
    "transformer.l_leakage": ("transformer", "l_leakage", "H"),
    "transformer.r_primary": ("transformer", "r_primary", "ohm"),
    "transformer.r_secondary_referred": ("transformer", "r_secondary_referred", "ohm"),
    "transformer.p_core": ("transformer", "p_core", "W"),
    "transformer.c_filter": ("transformer", "c_filter", "F"),
    "switches.v_ces": ("switches", "v_ces", "V"),
    "switches.v_on_drop": ("switches", "v_on_drop", "V"),
    "switches.v_dc": ("switches", "v_dc", "V"),
    "controller.sag_enter": ("controller", "sag_enter_pu", ""),
    "controller.sag_exit": ("controller", "sag_exit_pu", ""),
    "controller.overcurrent_multiple": ("controller", "overcurrent_multiple", ""),
    "controller.rearm_multiple": ("controller", "rearm_multiple", ""),
    "controller.rearm_hold": ("controller", "rearm_hold", "s"),
    "controller.rms_window": ("controller", "rms_window", "s"),
    "controller.compensation": ("controller", "compensation_enabled", None),
    "controller.limiter": ("controller", "limiter_enabled", None),
}

EVENT_KEYS = {"kind", "start", "end", "depth", "harmonics", "resistance"}


@dataclass(frozen=True)
class Scenario:
    grid: GridParams
    transformer: TransformerParams
    switches: SwitchParams
    controller: ControllerConfig
    events: tuple = ()
    horizon: float = 0.4
    dt: float = 1e-5
    preset: str | None = None
    load_va: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "events", validate_events(self.events))
        _require(self.horizon > 0, "horizon must be > 0")
        if self.events:
            _require(
                self.horizon >= max(e.end for e in self.events),
                "horizon must cover every event",
            )
        _require(self.load_va is None or self.load_va > 0, "load_va must be > 0")
        _check_dt(self.dt, self.grid)
        _check_network(self.grid, self.transformer)

    @property
    def rated_load_va(self) -> float:
        """Explicit ``load_va``, else ``V^2/|Z_load|``."""
        if self.load_va is not None:
            return self.load_va
        return self.grid.v_source_rms**2 / self.grid.load_impedance().magnitude

    def with_events(self, *events, **changes) -> Scenario:
        return replace(self, events=tuple(events), **changes)


def _table2() -> Scenario:
    grid = GridParams(220.0, 50.0, 0.1, 0.5e-3, 45.0, 0.01)
    return Scenario(
        grid=grid,
        transformer=TransformerParams(turns_ratio_a=5.0, l_magnetizing=0.08, l_leakage=0.0017),
        switches=SwitchParams(v_ces=1200.0, v_on_drop=2.0, v_dc=40.0),
        controller=ControllerConfig.for_frequency(grid.frequency),
        preset="table2",
    )


def _table3() -> Scenario:
    grid = GridParams(63.0, 50.0, 0.0, 0.0, 45.0, 0.001)
    return Scenario(
        grid=grid,
        transformer=TransformerParams(
            turns_ratio_a=5.0, l_magnetizing=0.08, l_leakage=0.0017, c_filter=20e-6
        ),
        switches=SwitchParams(v_ces=1200.0, v_on_drop=2.0, v_dc=10.0),
        controller=ControllerConfig.for_frequency(grid.frequency),
        preset="table3",
    )


def sag_fault_scenario(base: Scenario | None = None) -> Scenario:
    """The 28 % sag over 100-200 ms followed by a bolted PCC fault over 250-350 ms."""
    base = base or PRESETS["table2"]
    return base.with_events(SagEvent(0.1, 0.2, 0.28), FaultEvent(0.25, 0.35, 0.0))


# Built at import, so every preset is checked against the type invariants.
PRESETS: dict[str, Scenario] = {s.preset: s for s in (_table2(), _table3())}


def preset(name: str) -> Scenario:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValidationError(f"unknown preset {name!r}; known: {sorted(PRESETS)}") from None


_LINE = re.compile(r"^([A-Za-z_][\w.]*)\s*=\s*(.*?)\s*$")


def parse_scenario(text: str) -> Scenario:
    """Parse a scenario document into a validated :class:`Scenario`."""
    top: dict[str, tuple[str, int]] = {}
    blocks: list[tuple[int, dict[str, tuple[str, int]]]] = []
    current = top
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if line != "[event]":
                raise ScenarioParseError(f"unknown section {line!r}", lineno)
            current = {}
            blocks.append((lineno, current))
            continue
        m = _LINE.match(line)
        if not m:
            raise ScenarioParseError(f"expected 'key = value', got {line!r}", lineno)
        key, value = m.groups()
        if current is top:
            if key not in SCENARIO_KEYS and key != "preset":
                raise ScenarioParseError(f"unknown key {key!r}", lineno)
        elif key not in EVENT_KEYS:
            raise ScenarioParseError(f"unknown event key {key!r}", lineno)
        if key in current:
            raise ScenarioParseError(f"duplicate key {key!r}", lineno)
        current[key] = (value, lineno)

    if "preset" in top:
        name, lineno = top.pop("preset")
        try:
            base = preset(name)
        except ValidationError as exc:
            raise ScenarioParseError(str(exc), lineno) from None
        sections = {
            "grid": _as_dict(base.grid),
            "transformer": _as_dict(base.transformer),
            "switches": _as_dict(base.switches),
            "": {"horizon": base.horizon, "dt": base.dt, "load_va": base.load_va},
        }
        controller = _as_dict(base.controller)
        base_freq = base.grid.frequency
    else:
        name = None
        sections = {"grid": {}, "transformer": {}, "switches": {}, "": {}}
        controller = {}
        base_freq = None

    for key, (value, lineno) in top.items():
        section, attr, dim = SCENARIO_KEYS[key]
        try:
            parsed = _parse_bool(value) if dim is None else parse_quantity(value, dim)
        except ValidationError as exc:
            raise ScenarioParseError(f"{key}: {exc}", lineno) from None
        (controller if section == "controller" else sections[section])[attr] = parsed

    events = [_parse_event(lineno, block) for lineno, block in blocks]

    try:
        grid = GridParams(**sections["grid"])
        if base_freq is None or grid.frequency != base_freq:
            # timing defaults follow the grid frequency unless set explicitly
            defaults = _as_dict(ControllerConfig.for_frequency(grid.frequency))
            explicit = {SCENARIO_KEYS[k][1] for k in top if SCENARIO_KEYS[k][0] == "controller"}
            for attr in ("rearm_hold", "rms_window"):
                if attr not in explicit:
                    controller[attr] = defaults[attr]
        return Scenario(
            grid=grid,
            transformer=TransformerParams(**sections["transformer"]),
            switches=SwitchParams(**sections["switches"]),
            controller=ControllerConfig(**controller),
            events=tuple(events),
            preset=name,
            **{k: v for k, v in sections[""].items() if v is not None},
        )
    except TypeError as exc:
        # a required field was never given
        raise ValidationError(f"incomplete scenario: {exc}") from None


def _as_dict(obj) -> dict:
    return {f.name: getattr(obj, f.name) for f in fields(obj)}


def _parse_event(lineno: int, block: dict[str, tuple[str, int]]):
    def get(key, dim, default=None):
        if key not in block:
            if default is None:
                raise ScenarioParseError(f"event is missing {key!r}", lineno)
            return default
        value, ln = block[key]
        try:
            return parse_quantity(value, dim)
        except ValidationError as exc:
            raise ScenarioParseError(f"{key}: {exc}", ln) from None

    kind = block.get("kind", (None, lineno))[0]
    try:
        if kind == "sag":
            harmonics = ()
            if "harmonics" in block:
                harmonics = _parse_harmonics(block["harmonics"][0])
            return SagEvent(get("start", "s"), get("end", "s"), get("depth", ""), harmonics)
        if kind == "fault":
            return FaultEvent(get("start", "s"), get("end", "s"), get("resistance", "ohm", 0.0))
    except ScenarioParseError:
        raise
    except ValidationError as exc:
        raise ScenarioParseError(str(exc), lineno) from None
    raise ScenarioParseError(f"event kind must be 'sag' or 'fault', got {kind!r}", lineno)


def serialize_scenario(scenario: Scenario) -> str:
    """Render ``scenario`` as a document that parses back to an equal object."""
    lines = []
    if scenario.preset:
        lines.append(f"preset = {scenario.preset}")
    objs = {
        "grid": scenario.grid,
        "transformer": scenario.transformer,
        "switches": scenario.switches,
        "controller": scenario.controller,
        "": scenario,
    }
    for key, (section, attr, dim) in SCENARIO_KEYS.items():
        value = getattr(objs[section], attr)
        if value is None:
            continue
        if dim is None:
            lines.append(f"{key} = {'on' if value else 'off'}")
        else:
            lines.append(f"{key} = {_fmt(value, dim)}")
    for ev in scenario.events:
        lines += ["", "[event]"]
        if isinstance(ev, SagEvent):
            lines += ["kind = sag", f"start = {ev.start!r} s", f"end = {ev.end!r} s",
                      f"depth = {ev.depth_alpha!r}"]
            if ev.harmonics:
                lines.append("harmonics = " + ", ".join(f"{o}:{f!r}" for o, f in ev.harmonics))
        else:
            lines += ["kind = fault", f"start = {ev.start!r} s", f"end = {ev.end!r} s",
                      f"resistance = {ev.fault_resistance!r} ohm"]
    return "\n".join(lines) + "\n"


def _fmt(value: float, dim: str) -> str:
    if not math.isfinite(value):
        raise ValidationError(f"cannot serialize non-finite value {value!r}")
    return f"{value!r} {dim}".rstrip()


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        return parse_scenario(fh.read())
