"""Exception types shared across the package."""


class TclobError(Exception):
    pass


class ParameterError(TclobError, ValueError):
    """Invalid model or estimator parameters."""


class DomainError(TclobError, ValueError):
    """Argument outside the domain of a rate function."""


class RangeError(TclobError, ValueError):
    """Value outside the range of the cumulative clock."""


class DivergenceError(TclobError, ArithmeticError):
    pass


class UnsupportedFormError(TclobError, ValueError):
    """No asymptotic classification exists for this rate family."""


class TruncationError(TclobError, RuntimeError):
    """The truncated state space is too small for the requested accuracy."""


class InsufficientDataError(TclobError, RuntimeError):
    pass


class SchemaError(TclobError, ValueError):
    """Malformed event file; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line
