"""Exception types shared across the package.

Every error carries an ``origin`` naming the module and operation that raised
it, so command-line diagnostics can point at the failing step.
"""


class StentropyError(Exception):
    """Base class for all package errors."""

    def __init__(self, message, origin=None):
        super().__init__(message)
        self.origin = origin

    def __str__(self):
        msg = super().__str__()
        return f"[{self.origin}] {msg}" if self.origin else msg


class DataError(StentropyError, ValueError):
    """Invalid input data or a violated precondition."""


class FormatError(DataError):
    """A file does not look like the expected format at all."""


class OutOfBoundsError(DataError):
    """A coordinate lies outside the configured grid."""


class NumericalError(StentropyError, RuntimeError):
    """A numerical routine failed."""


class ConvergenceError(NumericalError):
    """P-IRLS did not converge; ``trace`` holds the penalized deviance history."""

    def __init__(self, message, origin=None, trace=()):
        super().__init__(message, origin)
        self.trace = list(trace)
