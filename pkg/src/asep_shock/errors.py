"""Exception types shared across the package."""


class AsepShockError(Exception):
    """Base class for all package errors."""


class DomainError(AsepShockError, ValueError):
    pass


class TimeNotAdmissible(AsepShockError, ValueError):
    """A time lies outside the admissible domain of the Askey-Wilson measures.

    ``nearest`` carries a nearby admissible time when one can be suggested.
    """

    def __init__(self, message, t=None, nearest=None):
        super().__init__(message)
        self.t = t
        self.nearest = nearest


class AcOnLattice(AsepShockError, ValueError):
    pass


class SupportError(AsepShockError, ValueError):
    pass


class QuadratureNotConverged(AsepShockError, RuntimeError):
    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class SizeLimit(AsepShockError, ValueError):
    pass


class SolveFailure(AsepShockError, RuntimeError):
    pass


class PreconditionViolation(AsepShockError, ValueError):
    pass


class ConstraintViolation(AsepShockError, ValueError):
    pass


class InsufficientSamples(AsepShockError, ValueError):
    pass


class DegenerateESS(UserWarning):
    pass
