"""Exception hierarchy shared by all stages.

Every error carries an ``exit_code`` so the CLI can map failures onto its
documented exit statuses: 1 = invariant violation, 2 = file/format error,
3 = wire-protocol error.
"""


class StereoweaveError(Exception):
    exit_code = 1


class InvariantError(StereoweaveError):
    """A contract on in-memory data was violated."""

    exit_code = 1


class ShapeMismatch(InvariantError):
    pass


class UnnormalizedDepth(InvariantError):
    pass


class InvalidViewCount(InvariantError):
    pass


class InvalidRange(InvariantError):
    pass


class BaselineTooLarge(InvariantError):
    pass


class FlowDimensionMismatch(InvariantError):
    pass


class FileFormatError(StereoweaveError):
    """A file on disk is missing, malformed, or holds unusable values."""

    exit_code = 2


class BadMagic(FileFormatError):
    pass


class TruncatedFile(FileFormatError):
    pass


class NonFiniteValues(FileFormatError):
    pass


class UnsupportedFormat(FileFormatError):
    pass


class NonPositiveDepth(FileFormatError):
    pass


class MissingIndex(FileFormatError):
    pass


class DimensionMismatch(FileFormatError):
    pass


class ProtocolError(StereoweaveError):
    exit_code = 3


class DegenerateRangeWarning(UserWarning):
    """Depth normalization saw a (near-)constant sequence."""


class UninpaintedMatrixWarning(UserWarning):
    """Stereo extraction found masked pixels still black in the right column."""
