"""Exception types shared across the package."""


class ConstraintError(ValueError):
    """An input violates a structural invariant (bad index, mismatched ids, ...)."""


class NumericError(ValueError):
    """A numeric input is unusable (NaN/Inf coordinates, ...)."""


class ParseError(ValueError):
    """A file could not be parsed. Carries the offending line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
