"""Exception hierarchy shared by every eseplab module."""


class EseplabError(Exception):
    """Base class for all library errors."""


class ValidationError(EseplabError, ValueError):
    """Parameters or configuration rejected before any computation."""


class NonPositiveRate(ValidationError):
    pass


class AffineMismatch(ValidationError):
    pass


class MissingField(ValidationError):
    pass


class CapacityMissing(MissingField):
    pass


class Unstable(ValidationError):
    """A steady-state quantity was requested for parameters with no steady state."""


class TimeOutOfRange(EseplabError, ValueError):
    pass


class NegativeTime(TimeOutOfRange):
    pass


class DomainViolation(EseplabError, ValueError):
    """A transform argument lies outside the region where the closed form holds."""


class BranchViolation(DomainViolation):
    """The square-root radicand of a counting transform is not positive."""


class DegenerateRate(DomainViolation):
    pass


class DimensionOverflow(EseplabError, ValueError):
    pass


class StepSizeUnderflow(EseplabError, ArithmeticError):
    pass


class EmptySample(EseplabError, ValueError):
    pass


class ExplosionGuard(EseplabError, RuntimeError):
    """A simulated path exceeded the configured event cap."""


class NonMonotoneKernel(ValidationError):
    pass


class UnknownClaim(EseplabError, KeyError):
    pass


class DuplicateClaim(EseplabError, ValueError):
    pass


class ConfigInvalid(ValidationError):
    pass
