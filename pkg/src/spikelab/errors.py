"""Exception types shared across spikelab modules."""


class SpikeLabError(Exception):
    """Base class for all spikelab errors."""


class DomainValidityError(SpikeLabError, ValueError):
    """Input outside the mathematical domain of an operation (e.g. a divergent
    integral exponent, or a point outside the geometric domain)."""


class SingularityError(SpikeLabError, ValueError):
    """Evaluation requested at a kernel singularity (x == y)."""


class PreconditionError(SpikeLabError, ValueError):
    """A documented operation precondition was violated."""


class AccuracyError(SpikeLabError, RuntimeError):
    """A solve finished but its estimated defect exceeds the allowed threshold.

    Carries ``estimate`` with the measured defect.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class ConditioningError(SpikeLabError, RuntimeError):
    """A linear solve was abandoned because of hopeless conditioning.

    Carries ``condition`` with the estimated condition number.
    """

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class NotCertifiableError(SpikeLabError, RuntimeError):
    """A degree certificate could not be issued (boundary margin violated or
    a degenerate zero was encountered)."""


class BoundaryMinimizerError(SpikeLabError, RuntimeError):
    """Constrained minimization ended on the box boundary, so no interior
    critical point can be reported."""


class BracketError(SpikeLabError, RuntimeError):
    """A 1-D root bracket could not be established in the allowed range."""


class NoCrossingError(SpikeLabError, RuntimeError):
    """The shooting trajectory never crossed zero before the radius cap."""


class StepSizeError(SpikeLabError, RuntimeError):
    """The adaptive integrator failed (stiffness / step-size collapse)."""


class InsufficientDataError(SpikeLabError, ValueError):
    """Too few usable samples to run the requested fit."""


class ConfigError(SpikeLabError, ValueError):
    """Malformed configuration input; message names the offending key."""
