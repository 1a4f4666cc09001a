"""Exception hierarchy.

Every error raised by the package derives from :class:`ChaosLabError`.  The
CLI maps :class:`PreconditionError` and :class:`NumericalError` subclasses to
exit code 2.
"""


class ChaosLabError(Exception):
    """Base class for all package errors."""


class PreconditionError(ChaosLabError, ValueError):
    """An operation was called outside its domain."""


class NumericalError(ChaosLabError, ArithmeticError):
    """A computation produced an unusable numerical result."""


# chaos-core
class NonFiniteQuadrature(NumericalError):
    pass


class RankNotFound(NumericalError):
    pass


class ZeroRank(PreconditionError):
    pass


class NonzeroConstant(PreconditionError):
    pass


class NegativeTime(PreconditionError):
    pass


class UnknownFunction(PreconditionError):
    pass


# covariance
class InvalidCovariance(PreconditionError):
    pass


class DivergentSeries(NumericalError):
    pass


class CriticalRankOne(PreconditionError):
    pass


# gauss-sim
class NotEmbeddable(NumericalError):
    pass


class ReplicationError(ChaosLabError):
    """Wraps a simulation failure with the index of the failing replication."""

    def __init__(self, index, cause):
        super().__init__(f"replication {index}: {cause}")
        self.index = index
        self.cause = cause


# partial-sum
class NonCenteredExpansion(PreconditionError):
    pass


class GridOutOfRange(PreconditionError):
    pass


class PathTooShort(PreconditionError):
    pass


# limit-stats
class ConditionH1Violated(PreconditionError):
    pass


class DegenerateSample(NumericalError):
    pass


class InsufficientReplications(PreconditionError):
    pass


class NegativeVariance(NumericalError):
    pass


# cli-runner
class ConfigError(PreconditionError):
    pass


class NormalizationMismatch(PreconditionError):
    """Requested normalization disagrees with the regime under --strict."""
