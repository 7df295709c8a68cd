"""Exception hierarchy for mdmica."""


class MDMICAError(Exception):
    """Base class for all errors raised by this package."""


class InvalidIndexError(MDMICAError, ValueError):
    pass


class InvalidRotationError(MDMICAError, ValueError):
    pass


class InvalidAnglesError(MDMICAError, ValueError):
    pass


class ShapeError(MDMICAError, ValueError):
    pass


class InsufficientSampleError(MDMICAError, ValueError):
    pass


class SingularCovarianceError(MDMICAError, ValueError):
    """Sample covariance is singular or too ill-conditioned to whiten."""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class DegenerateBandwidthError(MDMICAError, ValueError):
    """The median heuristic is undefined for a component."""

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class NonFiniteObjectiveError(MDMICAError, FloatingPointError):
    """The objective returned NaN or inf."""

    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta


class IllConditionedGPError(MDMICAError, ArithmeticError):
    pass


class SingularMatrixError(MDMICAError, ValueError):
    pass
