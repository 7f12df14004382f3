"""Exception hierarchy shared by every module of the package."""


class CorrQPTError(Exception):
    """Base class for all errors raised by corrqpt."""


class DimensionError(CorrQPTError, ValueError):
    pass


class NotHermitianError(CorrQPTError, ValueError):
    pass


class NotPositiveError(CorrQPTError, ValueError):
    """A matrix that must be positive semidefinite has a negative eigenvalue."""

    def __init__(self, message, min_eigenvalue=None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue


class ConvergenceError(CorrQPTError, RuntimeError):
    pass


class TraceIncreasingError(CorrQPTError, ValueError):
    pass


class DegeneratePreparationError(CorrQPTError, ValueError):
    """The preparation succeeds with (numerically) zero probability."""


class IllConditionedBasisError(CorrQPTError, ValueError):
    pass


class IncompleteRecordError(CorrQPTError, ValueError):
    pass


class DegenerateRecordError(CorrQPTError, ValueError):
    """A tomography record contains rows with vanishing success probability."""

    def __init__(self, message, rows=()):
        super().__init__(message)
        self.rows = tuple(rows)


class SearchFailedError(CorrQPTError, RuntimeError):
    pass


class FormatError(CorrQPTError, ValueError):
    """Malformed text payload (matrix, tensor, record or report)."""


class ScenarioVerificationError(CorrQPTError, RuntimeError):
    """A generated instance does not have the properties it was built to have."""
