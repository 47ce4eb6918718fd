"""Exception hierarchy shared by all ffscaling modules."""


class FFScalingError(Exception):
    """Base class for every error raised by this package."""


class ContractViolation(FFScalingError, ValueError):
    """An input violated a documented precondition (e.g. non-Hermitian matrix)."""


class InvalidDimensionError(FFScalingError, ValueError):
    pass


class InvalidBasisError(FFScalingError, ValueError):
    pass


class InvalidProtocolError(FFScalingError, ValueError):
    pass


class OutOfDomainError(FFScalingError, ValueError):
    """A sampled operator was evaluated away from its sample grid."""


class IntegrationQualityError(FFScalingError):
    def __init__(self, drift, limit):
        super().__init__(f"norm drift {drift:.3e} exceeds gate {limit:.1e}")
        self.drift = drift
        self.limit = limit


class InfeasibleError(FFScalingError):
    """No real phase solves the reality condition at ``time``."""

    def __init__(self, time, residual=float("nan"), message=None):
        msg = message or f"no real phase solution at t={time:.17g} (residual {residual:.3e})"
        super().__init__(msg)
        self.time = time
        self.residual = residual


class BranchLossError(FFScalingError):
    def __init__(self, time, jump):
        super().__init__(f"phase branch jumped by {jump:.3e} at t={time:.17g}")
        self.time = time
        self.jump = jump


class DegenerateSpectrumError(FFScalingError):
    def __init__(self, time, gap):
        super().__init__(f"spectrum degenerate at t={time:.17g} (gap {gap:.3e})")
        self.time = time
        self.gap = gap


class VanishingFieldError(FFScalingError):
    def __init__(self, time, magnitude):
        super().__init__(f"field magnitude {magnitude:.3e} at t={time:.17g}; levels cross")
        self.time = time
        self.magnitude = magnitude
