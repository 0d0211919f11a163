"""Exception hierarchy.

Everything raised for bad user input derives from :class:`ValidationError`
(CLI exit code 2); numerical failures of a running simulation raise
:class:`SimulationAborted` (exit code 3).
"""


class ValidationError(ValueError):
    """A parameter or document violates a stated invariant."""


class DegenerateImpedanceError(ValidationError):
    """An impedance (or a divider denominator) is exactly zero."""


class UnitError(ValidationError):
    """A quantity carries a missing, unknown, or dimensionally wrong unit."""


class ScenarioParseError(ValidationError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class OverlappingEventsError(ValidationError):
    pass


class StepSizeError(ValidationError):
    pass


class ModeError(ValidationError):
    """An operation was asked for an operating mode it does not cover."""


class MissingParameterError(ValidationError):
    def __init__(self, entry, symbol):
        self.entry = entry
        self.symbol = symbol
        super().__init__(f"topology {entry}: missing parameter {symbol!r}")


class MissingEventLogError(ValidationError):
    pass


class SimulationAborted(RuntimeError):
    """The integrator produced a non-finite state."""
