"""Exception hierarchy shared by all qttagg modules."""


class QttaggError(Exception):
    """Base class for all qttagg errors."""


class InvalidArgumentError(QttaggError, ValueError):
    """Raised when an argument violates a documented precondition."""


class ResourceLimitError(QttaggError, RuntimeError):
    """Raised when a configured size cap (bond dimension, dense size,
    support cardinality) would be exceeded.

    The optional ``step`` attribute identifies which pipeline step hit the
    limit, so incompressible regimes can be located.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class NumericFailureError(QttaggError, RuntimeError):
    """Raised when a numeric computation produced NaN/overflow or an
    iterative solver failed to converge to a usable answer."""


class ConvergenceFailureError(NumericFailureError):
    """Raised when an adaptive approximation did not reach its tolerance.

    Carries the best error estimate achieved in ``achieved``.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved
