"""
Custom exceptions for the loop soup toolkit.
Provides specific error handling for different failure scenarios.
"""


class LoopSoupError(Exception):
    """Base exception for all loop soup errors."""
    pass


class ValidationError(LoopSoupError):
    """Raised when a parameter violates an operation's precondition."""

    def __init__(self, parameter: str, message: str):
        self.parameter = parameter
        self.message = message
        super().__init__(f"Invalid {parameter}: {message}")


class LoopValidationError(ValidationError):
    """Raised when a lattice loop is not closed, has odd length or a non-unit step."""

    def __init__(self, message: str):
        super().__init__('loop', message)


class FieldRangeError(ValidationError):
    """Raised when a Poisson field is queried beyond its generated horizon."""

    def __init__(self, requested: float, limit: float):
        self.requested = requested
        self.limit = limit
        super().__init__(
            'lambda',
            f"{requested} exceeds the field horizon lambda_max={limit}"
        )


class SchemaError(LoopSoupError):
    """Raised when a soup or report document fails schema validation."""

    def __init__(self, location: str, message: str):
        self.location = location
        self.message = message
        super().__init__(f"Schema Error at {location}: {message}")


class ExportError(LoopSoupError):
    """Raised when an output file cannot be written."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"Export Error [{path}]: {message}")


class SuiteFailure(LoopSoupError):
    """Raised when a verification suite ran but some checks failed."""

    def __init__(self, suite: str, failed_checks: list[str]):
        self.suite = suite
        self.failed_checks = failed_checks
        super().__init__(
            f"Suite '{suite}' failed checks: {', '.join(failed_checks)}"
        )
