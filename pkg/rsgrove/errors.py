"""
Exception hierarchy for the partitioning pipeline.

Library code raises these; the CLI maps them to exit codes in a single
handler (see rsgrove.main).
"""


class GroveError(Exception):
    """Base class for every error raised by rsgrove."""


# ========== Data errors (exit code 2) ==========

class DataError(GroveError):
    """Input data or an intermediate file is unusable."""


class RecordParseError(DataError):
    """A single input line could not be parsed."""

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        prefix = f"line {line_number}: " if line_number is not None else ""
        super().__init__(f"{prefix}{message}")


class EmptyInputError(DataError):
    """The record stream contained no usable records."""


class EmptySampleError(DataError):
    """Sampling produced no points."""


class InvalidPartitionSizeError(DataError):
    """A total cannot be split into parts within [m, M]."""


class InsufficientSampleError(DataError):
    """The sample is too small to guarantee a valid partitioning."""


class SchemeFormatError(DataError):
    """A scheme, manifest or sidecar file does not have the expected shape."""


class DimensionMismatchError(DataError, ValueError):
    """Two geometric operands have different dimensionality."""


# ========== Control-flow errors ==========

class NoSplitCandidateError(GroveError):
    """A node has too few points for any candidate split."""


# ========== Internal errors (exit code 3) ==========

class GroveInternalError(GroveError):
    """An invariant that should be impossible to break was broken."""
