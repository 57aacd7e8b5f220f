"""Exception hierarchy.

Every domain failure raised by the library derives from :class:`MSKError`.
The CLI prints the class name on stderr and exits with status 1.
"""


class MSKError(Exception):
    """Base class for all domain errors."""


# model validation
class AsymmetricMatrix(MSKError, ValueError):
    pass


class NegativeEntry(MSKError, ValueError):
    pass


class SingularMatrix(MSKError, ValueError):
    pass


class BadRatios(MSKError, ValueError):
    pass


class DimensionMismatch(MSKError, ValueError):
    pass


# quadrature
class NonFiniteValue(MSKError, ArithmeticError):
    pass


class NegativeVariance(MSKError, ValueError):
    pass


# fixed-point solvers
class NoConvergence(MSKError, RuntimeError):
    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class InfeasibleIterate(MSKError, RuntimeError):
    def __init__(self, message, species=None):
        super().__init__(message)
        self.species = species


class SingularJacobian(MSKError, RuntimeError):
    pass


class NotIndefinite2x2(MSKError, ValueError):
    pass


class ZeroField(MSKError, ValueError):
    pass


class OnlyZeroFound(MSKError, RuntimeError):
    pass


class DimensionTooLarge(MSKError, ValueError):
    pass


# spectra / phase
class EigenFailure(MSKError, RuntimeError):
    pass


class ZeroSpectralRadius(MSKError, ArithmeticError):
    pass


class NotPositiveDefinite(MSKError, ValueError):
    pass


# covariance
class NotStable(MSKError, ValueError):
    pass


class BackendDisagreement(MSKError, RuntimeError):
    pass


class StabilityViolated(MSKError, RuntimeError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


# parisi
class NegativeIncrement(MSKError, ValueError):
    pass


class StepTooSmall(MSKError, ValueError):
    pass


# simulator
class BadSize(MSKError, ValueError):
    pass


class TooLarge(MSKError, ValueError):
    pass


class LadderMisconfigured(MSKError, ValueError):
    pass
