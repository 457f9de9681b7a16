"""Exception and warning types shared across the package."""


class NoiseCalError(ValueError):
    """Base class for invalid inputs and failed computations."""


class DegenerateChainError(NoiseCalError):
    pass


class PreconditionError(NoiseCalError):
    pass


class InsufficientDataError(NoiseCalError):
    pass


class ExtrapolationError(NoiseCalError):
    pass


class SchemaError(NoiseCalError):
    """A document (JSON/CSV) does not follow its schema."""

    def __init__(self, message, location=None):
        self.location = location
        if location is not None:
            message = f"{location}: {message}"
        super().__init__(message)


class SingularFitError(NoiseCalError):
    """Normal equations are singular at the solution."""

    def __init__(self, message, condition=float("inf")):
        self.condition = condition
        super().__init__(f"{message} (condition estimate {condition:.3g})")


class UnphysicalResultWarning(UserWarning):
    pass


class NonlinearityWarning(UserWarning):
    pass


class BoundActiveWarning(UserWarning):
    pass
