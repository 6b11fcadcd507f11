"""
Errors raised while generating, partitioning or loading datasets.
"""


class DatasetError(ValueError):
    """A dataset violates its invariants or a generator precondition."""


class PartitionError(DatasetError):
    """Samples cannot be split across agents as requested."""


class IdxFormatError(DatasetError):
    """An IDX file could not be parsed."""


class IdxMagicError(IdxFormatError):
    """Unexpected magic number in an IDX header."""


class IdxTruncatedError(IdxFormatError):
    """An IDX file ends before its header says it should."""


class IdxCountMismatchError(IdxFormatError):
    """Image and label files disagree on the number of items."""
