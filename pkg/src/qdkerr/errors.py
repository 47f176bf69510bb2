"""Exception types raised across the package."""


class QdKerrError(ValueError):
    """Base class for invalid-input conditions."""


class DomainError(QdKerrError):
    """Argument lies outside the mathematical domain of an operation."""


class UndefinedInputError(QdKerrError):
    """All rates vanish, so a ratio such as the beta factor is undefined."""


class EstimatorUndefinedError(QdKerrError):
    """The phase estimator needs H > 0 and V > 0."""


class InconsistentCountsError(QdKerrError):
    """Counts imply |sin(phi)| > 1 beyond numerical slack."""


class UndefinedOrientationError(QdKerrError):
    """No linear polarization component to orient."""


class InfeasibleError(QdKerrError):
    """No solution exists for the requested target."""


class ExtrapolationError(QdKerrError):
    """A tabulated curve was queried outside its range."""


class NonConvergenceError(RuntimeError):
    """Optimizer hit its iteration limit. ``result`` holds the best point found."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
