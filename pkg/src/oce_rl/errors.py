"""Exception types raised across the package."""


class OceError(ValueError):
    """Base class for all domain errors raised by oce_rl."""


class OutsideDomainError(OceError):
    """A utility was evaluated (or differentiated) outside dom(u)."""


class InvalidDistributionError(OceError):
    pass


class InvalidMdpError(OceError):
    pass


class MismatchedMdpsError(OceError):
    pass


class NotLearnableError(OceError):
    """The utility has restricted domain; no finite PAC budget exists."""


class InvalidParametersError(OceError):
    pass


class HypothesisViolatedError(OceError):
    pass
