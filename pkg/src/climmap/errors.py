"""Exception hierarchy shared by every climmap module."""

from __future__ import annotations


class ClimmapError(Exception):
    """Base class for all climmap errors."""


class ParseError(ClimmapError):
    """A climate file violates the CLIM1 format."""

    def __init__(self, line: int, reason: str, path: str | None = None):
        self.line = line
        self.reason = reason
        self.path = path
        where = f"{path}:" if path else "line "
        super().__init__(f"{where}{line}: {reason}")


class LengthError(ClimmapError):
    """Series lengths are inconsistent or not a whole number of years."""


class ArgumentError(ClimmapError, ValueError):
    """An argument is outside its allowed domain."""


class ClimmapIOError(ClimmapError, OSError):
    """Reading or writing a file failed."""


class DimensionError(ClimmapError, ValueError):
    """Matrix or vector shapes do not conform."""


class NumericError(ClimmapError, ValueError):
    """A matrix contains non-finite entries."""


class SingularError(ClimmapError):
    """A linear solve hit a (numerically) singular matrix."""


class DivergenceError(ClimmapError):
    """The simulated state became non-finite."""

    def __init__(self, step: int, station: str | None = None):
        self.step = step
        self.station = station
        msg = f"state became non-finite at step {step}"
        if station is not None:
            msg = f"station {station}: {msg}"
        super().__init__(msg)


class ConfigError(ClimmapError, ValueError):
    """A configuration document is invalid; ``field`` names the offending path."""

    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}" if field else reason)


class EmptyError(ClimmapError, ValueError):
    """An operation received no data to work on."""


class JoinError(ClimmapError):
    """Station sets of the three periods do not match."""

    def __init__(self, station: str, reason: str = "station missing from one period"):
        self.station = station
        super().__init__(f"{reason}: {station}")
