"""Exception hierarchy shared by every module of the package."""


class SymObsError(Exception):
    """Base class for all package errors."""


class DomainViolation(SymObsError, ValueError):
    """A point lies outside the domain of a group transformation."""


class SingularTimeJacobian(SymObsError, ArithmeticError):
    """The time derivative of the time-scale map vanishes."""


class InconclusiveClassification(SymObsError):
    """Numerical evidence about a time-scale class is mixed."""


class NonPositiveBound(SymObsError, ValueError):
    """A saturation level was not strictly positive."""


class NoFeasibleSelection(SymObsError, ValueError):
    """No (lambda1, lambda0) pair satisfies the filter design inequality."""


class InvalidBounds(SymObsError, ValueError):
    """Constants supplied to a norm-estimator construction are inconsistent."""


class TuningDiverged(SymObsError, RuntimeError):
    """The group-parameter search exceeded its cap."""


class PastBlowup(SymObsError, ValueError):
    """A time at or beyond the blow-up instant of a bounded time scale was requested."""


class DivergenceDetected(SymObsError, RuntimeError):
    """An integrated state left the admissible range."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class UnstabilizablePair(SymObsError, ValueError):
    """Pole placement could not produce a Hurwitz error matrix."""


class InvalidK(SymObsError, ValueError):
    """Exponent k of the triangular benchmark is out of range."""


class InvalidExponents(SymObsError, ValueError):
    """Weights of the homogeneous benchmark are out of range."""


class InvalidGT(SymObsError, ValueError):
    """Time weight of the asymptotic benchmark is below its certified range."""
