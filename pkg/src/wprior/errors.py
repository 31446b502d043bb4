"""Exception types shared across the package."""


class DomainError(ValueError):
    """A parameter or argument lies outside its admissible set."""


class CapabilityError(NotImplementedError):
    """The requested operation has no implementation for this family."""


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance.

    The best available estimate is kept on the exception so callers can
    decide whether it is usable.
    """

    def __init__(self, message, value=None, error=None, evaluations=0):
        super().__init__(message)
        self.value = value
        self.error = error
        self.evaluations = evaluations


class InvalidStartError(ValueError):
    """An MCMC chain was started where the log target is not finite."""


class ProprietyError(RuntimeError):
    """Sufficient conditions for a proper posterior were not verified."""

    def __init__(self, verdict):
        super().__init__(verdict.describe())
        self.verdict = verdict
