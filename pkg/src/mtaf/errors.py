"""Exception types raised by dataset validation and the test engine."""


class MtafError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(MtafError):
    """Input components disagree on subject count or subject ids."""


class NonBinaryCoding(MtafError):
    """A trait declared binary contains a value outside {0, 1}."""


class RankDeficientCovariates(MtafError):
    """The intercept-augmented covariate matrix is not full column rank."""


class AllSnpsConstant(MtafError):
    """Every genotype vector was constant; nothing left to test."""


class IrlsNonConvergence(MtafError):
    """Logistic null fit failed to converge within the iteration cap."""


class SeparationDetected(MtafError):
    """Logistic null fit produced fitted probabilities at 0 or 1."""


class DegenerateGenotype(MtafError):
    """Genotype lies in the covariate span; score variance vanishes."""


class EmptyMatrix(MtafError):
    """A p-value matrix with zero rows or columns reached a combiner."""


class NonPositiveEntry(MtafError):
    """A p-value <= 0 reached the combiner; upstream clamping failed."""


class ShapeMismatch(MtafError):
    """Matrices being combined disagree on permutation count or shape."""


class PermutationCountTooSmall(MtafError):
    """Requested permutation count is below the supported minimum."""


class RankDeficientTraits(UserWarning):
    """Trait residual matrix has fewer nonzero singular values than columns."""
