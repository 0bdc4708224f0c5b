"""Exception hierarchy.

Configuration problems derive from :class:`ConfigError`, numerical failures
from :class:`NumericalError`. The CLI maps these two families to distinct
exit codes.
"""


class QKEError(Exception):
    """Base class for all package errors."""


class ConfigError(QKEError, ValueError):
    pass


class NonPositiveParameter(ConfigError):
    pass


class RatioOutOfRange(ConfigError):
    pass


class ParseError(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class NumericalError(QKEError, ArithmeticError):
    pass


class QuadratureNotConverged(NumericalError):
    pass


class DomainNotSupported(NumericalError):
    pass


class StepSizeUnderflow(NumericalError):
    pass


class ConstraintViolated(NumericalError):
    pass


class GridTooCoarse(NumericalError):
    pass


class GridMismatch(QKEError, ValueError):
    pass


class DivisionByZeroBaseline(NumericalError, ZeroDivisionError):
    pass


class ModeFailure(NumericalError):
    """A mode solve failed inside a distribution; carries the node coordinates."""

    def __init__(self, p_par, p_perp, cause):
        self.p_par = p_par
        self.p_perp = p_perp
        self.cause = cause
        super().__init__(
            f"mode (p_par={p_par:.6g}, p_perp={p_perp:.6g}) failed: "
            f"{type(cause).__name__}: {cause}"
        )
