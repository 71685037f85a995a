"""Exception hierarchy shared by every stage of the pipeline."""


class CXRError(Exception):
    """Base class for all errors raised by cxr_regions."""


class UnsupportedFormat(CXRError, ValueError):
    pass


class CorruptData(CXRError, ValueError):
    pass


class NonBinaryMask(CXRError, ValueError):
    pass


class IoError(CXRError, OSError):
    pass


class EmptyMask(CXRError, ValueError):
    pass


class DimensionMismatch(CXRError, ValueError):
    pass


class InvalidParams(CXRError, ValueError):
    pass


class DegenerateBlob(CXRError, ValueError):
    pass


class AngleOutOfRange(CXRError, ValueError):
    pass


class LowConfidence(CXRError, ValueError):
    pass


class ViewMismatch(CXRError, ValueError):
    pass


class BoxOutsideImage(CXRError, ValueError):
    pass


class TooSmall(CXRError, ValueError):
    pass


class NotTwoLungs(CXRError, ValueError):
    pass


class OverlappingLungs(CXRError, ValueError):
    pass


class BothEmpty(CXRError, ValueError):
    pass


class EmptyList(CXRError, ValueError):
    pass


class InvalidSpec(CXRError, ValueError):
    pass


class MissingInput(CXRError, ValueError):
    pass


class BothEmptyWarning(UserWarning):
    """Dice was requested on two empty masks and 1.0 was returned."""
