"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid spec, configuration or argument."""


class InfeasibleError(RuntimeError):
    """The max-margin problem has no feasible point (data not separable).

    ``best`` holds the last iterate when one exists.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class TrainingFailure(RuntimeError):
    """Training ran out of budget before reaching the loss threshold."""

    def __init__(self, message, params=None, trace=None):
        super().__init__(message)
        self.params = params
        self.trace = trace
