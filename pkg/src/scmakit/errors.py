"""Exception types raised across the package."""


class ScmaError(Exception):
    """Base class for all scmakit errors."""


class ZeroEnergy(ScmaError, ValueError):
    pass


class UnsupportedSize(ScmaError, ValueError):
    pass


class UnknownName(ScmaError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""


class ParseError(ScmaError, ValueError):
    pass


class InvariantViolation(ScmaError, ValueError):
    """A constellation or matrix failed a structural check.

    ``invariant`` names the check that failed so callers (and the CLI) can
    report it without parsing the message.
    """

    def __init__(self, invariant: str, message: str = ""):
        self.invariant = invariant
        super().__init__(f"{invariant}: {message}" if message else invariant)


class NotUnitary(ScmaError, ValueError):
    pass


class DegeneratePair(ScmaError, ValueError):
    pass


class DimensionMismatch(ScmaError, ValueError):
    pass


class InvalidN0(ScmaError, ValueError):
    pass


class InvalidConfig(ScmaError, ValueError):
    pass


class NonFinite(ScmaError, FloatingPointError):
    pass


class TooLarge(ScmaError, ValueError):
    pass


class LengthMismatch(ScmaError, ValueError):
    pass


class ConfigError(ScmaError, ValueError):
    pass


class GridMismatch(ScmaError, ValueError):
    pass
