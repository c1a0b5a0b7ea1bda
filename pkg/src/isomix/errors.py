"""Exception types raised by isomix."""


class IsomixError(Exception):
    """Base class for all isomix errors."""


class ValidationError(IsomixError):
    """Bad input data (CSV rows, raw observation tuples)."""


class NegativeTime(ValidationError):
    pass


class BadStatus(ValidationError):
    pass


class MixNotSimplex(ValidationError):
    pass


class InconsistentK(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class NoEvents(IsomixError):
    """event_times grid requested but the sample has no uncensored rows."""


class EstimationError(IsomixError):
    """Estimator could not run on the given sample."""


class NotIdentifiable(EstimationError):
    pass


class ZeroDenominator(EstimationError):
    pass


class NoRoot(EstimationError):
    pass


class SingularDesign(EstimationError):
    pass


class SingularSigma(EstimationError):
    pass


class CalibrationFailure(IsomixError):
    """Target censoring rate unreachable on the support."""


class TooManyFailures(IsomixError):
    """More than 10% of resampling replicates failed estimation."""
