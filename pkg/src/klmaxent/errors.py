"""Exception types shared across the package."""


class ConvergenceError(RuntimeError):
    """An iterative routine exhausted its budget without converging."""

    def __init__(self, message, best_estimate=None):
        super().__init__(message)
        self.best_estimate = best_estimate


class NonFiniteIterateError(FloatingPointError):
    """A solver iterate became NaN or infinite; message carries diagnostics."""

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class OracleError(RuntimeError):
    """A reference oracle failed to certify its own output."""


class TableParseError(ValueError):
    """A table file violates the expected schema; message cites the line."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
