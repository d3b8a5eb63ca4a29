"""Exception hierarchy.

Every error raised by the library derives from :class:`BesovLabError`.  The
CLI maps the subclasses onto its exit codes, so new failure modes should
subclass the closest existing category rather than the base class.
"""


class BesovLabError(Exception):
    """Base class for all library errors."""


class UsageError(BesovLabError, ValueError):
    """An operation was called with arguments of the wrong kind."""


class ConfigError(BesovLabError, ValueError):
    """Invalid parameters: out-of-range indices, inconsistent exponents."""

    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = list(errors) if errors else [message]


class DataError(BesovLabError, ValueError):
    """Input data is malformed (non-finite samples, wrong shapes)."""


class DomainError(BesovLabError, ArithmeticError):
    """A quantity is evaluated outside its domain of definition."""


class NumericError(BesovLabError, ArithmeticError):
    """A numerical procedure failed its own consistency check."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class SingularPencilError(NumericError):
    """``d_m + lambda + L(xi)`` is numerically zero at some node."""


class ExprSyntaxError(ConfigError):
    """Expression text could not be parsed; ``column`` is 1-based."""

    def __init__(self, message, column):
        super().__init__(f"{message} (column {column})")
        self.column = column


class CheckFailure(BesovLabError):
    """A bound that should hold was violated numerically."""
