"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """Raised when a caller passes an argument outside an operation's contract."""


class ConsistencyError(RuntimeError):
    """An internal invariant of the pipeline was violated.

    ``stage`` names the pipeline stage that detected it; the CLI maps this
    error to exit code 3.
    """

    def __init__(self, message, stage="unknown"):
        super().__init__(message)
        self.stage = stage
