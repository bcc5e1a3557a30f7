"""Exception types shared across the package."""


class BubbleDynError(Exception):
    """Base class for all bubbledyn errors."""


class DegenerateShapeError(BubbleDynError, ValueError):
    """Shape parameters are outside the admissible family (r <= 0, S not SPD)."""


class CompatibilityError(BubbleDynError, ValueError):
    """Boundary data violates the zero-net-flux condition of a bounded cavity."""


class UnsupportedConfigurationError(BubbleDynError, ValueError):
    """Configuration falls in a non-generic case the solver does not handle."""


class IllPosedProblemError(BubbleDynError, RuntimeError):
    """Collocation system is numerically singular."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class DiscretizationError(BubbleDynError, RuntimeError):
    """Discrete result violates a structural property (e.g. SPD added mass)."""

    def __init__(self, message, eigenvalues=None):
        super().__init__(message)
        self.eigenvalues = eigenvalues
