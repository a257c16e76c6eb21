"""Exception hierarchy shared across the pipeline.

Two broad families matter to callers: DataError (bad or insufficient
input, CLI exit code 2) and ConvergenceError (a numeric fit failed,
CLI exit code 3). Everything else derives from PipelineError.
"""


class PipelineError(Exception):
    """Base class for all errors raised by this package."""


class DataError(PipelineError):
    """Invalid, inconsistent, or insufficient input data."""


class ConvergenceError(PipelineError):
    """A numeric optimisation failed to converge."""


# -- ingest --------------------------------------------------------------

class MissingColumn(DataError):
    pass


class DuplicateColumn(DataError):
    pass


class EmptyTable(DataError):
    pass


class DuplicateDate(DataError):
    pass


class EmptyIntersection(DataError):
    pass


class TooFewRows(DataError):
    pass


# -- indicators ----------------------------------------------------------

class TooShort(DataError):
    pass


class ZeroClose(DataError):
    pass


# -- bn / dbn ------------------------------------------------------------

class VariableMissing(DataError):
    pass


class IncompleteAssignment(PipelineError):
    pass


class ZeroProbabilityEvidence(PipelineError):
    pass


class WindowLengthMismatch(DataError):
    pass


class UnknownVariable(DataError):
    pass


class EvidenceOnQuery(DataError):
    pass


# -- backtest / baselines -------------------------------------------------

class NoPositivePredictions(PipelineError):
    pass


class NonConvergence(ConvergenceError):
    pass


class DimensionMismatch(DataError):
    pass
