"""Exception taxonomy shared by all modules.

Every error carries an ``exit_code`` used by the CLI: 2 for usage-level
problems, 3 for violated preconditions/hypotheses, 4 is reserved for
budget caps (signalled through result statuses, not exceptions).
"""


class RrwError(Exception):
    exit_code = 3


class ExpressionSyntaxError(RrwError):
    """Raised by the expression parser; carries the offending position."""

    exit_code = 2

    def __init__(self, message, position=None):
        super().__init__(message if position is None else f"{message} (at position {position})")
        self.position = position


class InvalidParameter(RrwError):
    pass


class RangeViolation(RrwError):
    """f leaves (0, 1] somewhere on [0, 1] (f = 1 is allowed only if f >= 1/2 everywhere)."""


class NonIsolatedFixedPoints(RrwError):
    """f(x) - x vanishes on a whole stretch of the grid, e.g. the identity."""


class HorizonTooLarge(RrwError):
    pass


class UnsupportedRegime(RrwError):
    pass


class RegimeUndecidable(RrwError):
    pass


class PreconditionOrder(RrwError):
    pass


class IntegralityViolation(RrwError):
    pass


class SymmetryViolation(RrwError):
    pass


class NotLinear(RrwError):
    pass


class HypothesisUnmet(RrwError):
    pass


class MonotonicityViolation(RrwError):
    """A sweep/bisection observed an ordering the underlying maps forbid."""


class ConfigError(RrwError):
    exit_code = 2
