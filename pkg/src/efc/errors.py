"""Exception types shared across the package."""


class EfcError(Exception):
    """Base class for all package-specific failures."""


class DimensionMismatchError(EfcError):
    """An input vector or matrix has the wrong shape for the operation."""


class MalformedFileError(EfcError):
    """A data file could not be parsed (bad header, ragged rows, non-numeric cells)."""


class EmptyFileError(EfcError):
    """A data file contains nothing to parse."""


class EmptyDatasetError(EfcError):
    """An operation requires at least one data row."""


class NonFiniteError(EfcError):
    """A computation produced NaN or Inf where a finite value is required."""


class SingularProjectionError(EfcError):
    """The linear projection onto a confounder level set is numerically singular."""


class NumericalFailureError(EfcError):
    """A matrix factorization or solve failed beyond recoverable tolerance."""


class FoldTooSmallError(EfcError):
    """Cross-validation was asked for more folds than there are rows."""


class DegenerateDesignError(EfcError):
    """A regression design matrix is rank-deficient beyond tolerance."""


class AllDivergedError(EfcError):
    """Every surrogate solve in an average diverged; no estimate is available."""


class SvdFailureError(EfcError):
    """Singular value decomposition did not converge."""


class DomainExceededError(EfcError):
    """A trajectory left the domain on which bound constants are valid."""
