"""Exception hierarchy shared by every module of the package."""

from typing import Optional


class CavitySpinError(Exception):
    """Base class for all errors raised by the package."""


class InvalidInstanceError(CavitySpinError, ValueError):
    """A graph, configuration or state does not match its declared shape."""


class GraphFormatError(InvalidInstanceError):
    """A graph file could not be parsed or failed schema validation."""


class InvalidParameterError(CavitySpinError, ValueError):
    """A physical or numerical parameter lies outside its allowed range."""


class CapacityError(CavitySpinError):
    """An exact oracle was asked for an instance beyond its enumeration bound."""


class BelowThresholdError(CavitySpinError):
    """The pump does not exceed the lasing threshold, so no condensate forms."""


class EmptyCondensateError(CavitySpinError):
    """A spin mode carries no intensity, so its phase is undefined."""


class DivergenceError(CavitySpinError):
    """Integration produced a non-finite amplitude."""

    def __init__(
        self, mode_index: int, time: float, pulse_index: Optional[int] = None
    ) -> None:
        self.mode_index = mode_index
        self.time = time
        self.pulse_index = pulse_index
        where = f" during pulse {pulse_index}" if pulse_index is not None else ""
        super().__init__(
            f"Non-finite amplitude in mode {mode_index} at t={time:.6g}{where}"
        )

    def __reduce__(self):  # type: ignore[no-untyped-def]
        return (type(self), (self.mode_index, self.time, self.pulse_index))

    def at_pulse(self, pulse_index: int) -> "DivergenceError":
        """Return a copy tagged with the pulse it occurred in."""
        return DivergenceError(self.mode_index, self.time, pulse_index)


INPUT_ERRORS = (InvalidInstanceError, InvalidParameterError, CapacityError)
