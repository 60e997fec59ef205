"""Exception types shared across the package.

The CLI maps ``ValidationError`` to exit status 1 and ``NumericalFailure``
to exit status 2.
"""


class LatgasError(Exception):
    pass


class ValidationError(LatgasError, ValueError):
    """Bad input: parameters outside a precondition."""


class NumericalFailure(LatgasError, RuntimeError):
    """A solver did not converge or produced an inadmissible result.

    ``diagnostics`` carries whatever the failing routine recorded (bracket
    traces, residual histories, ...).
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
