"""Exception types raised across the package.

Every error carries the process exit code the command-line front end maps
it to: 1 for an infeasible instance, 2 for other domain errors, 3 for
unparsable input files.
"""


class ObfuskitError(ValueError):
    exit_code = 2


class NegativeMass(ObfuskitError):
    pass


class MassMismatch(ObfuskitError):
    pass


class NotInterior(ObfuskitError):
    pass


class SupportViolation(ObfuskitError):
    pass


class MarginalMismatch(ObfuskitError):
    pass


class InconsistentMarginals(ObfuskitError):
    pass


class DegenerateMarginal(ObfuskitError):
    pass


class DimensionMismatch(ObfuskitError):
    pass


class ZeroDirection(ObfuskitError):
    pass


class EpsilonTooLarge(ObfuskitError):
    pass


class RequestedTooManyDirections(ObfuskitError):
    pass


class CardinalityBoundExceeded(RequestedTooManyDirections):
    """More release symbols requested than |Z| <= |X| + 2 allows."""


class OracleScaleExceeded(ObfuskitError):
    pass


class PairUnavailable(ObfuskitError):
    pass


class InfeasibleInstance(ObfuskitError):
    exit_code = 1


class ParseError(ObfuskitError):
    exit_code = 3
