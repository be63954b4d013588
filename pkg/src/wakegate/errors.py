"""Exception hierarchy shared across the package."""


class WakegateError(Exception):
    """Base class for all package errors."""


class AudioFormatError(WakegateError):
    """Raised for audio that cannot be read or does not match the pipeline format."""


class NotWav(AudioFormatError):
    pass


class UnsupportedFormat(AudioFormatError):
    pass


class TruncatedFile(AudioFormatError):
    pass


class SilentInput(WakegateError, ValueError):
    pass


class TooShort(WakegateError, ValueError):
    pass


class InvalidRange(WakegateError, ValueError):
    pass


class ShapeMismatch(WakegateError, ValueError):
    pass


class InsufficientAudio(WakegateError, ValueError):
    pass


class UnknownWakewordKey(WakegateError, KeyError):
    pass


class UnknownClient(WakegateError, KeyError):
    pass


class EmptyBatch(WakegateError, ValueError):
    pass


class SingleClassData(WakegateError, ValueError):
    pass


class ZeroVector(WakegateError, ValueError):
    pass


class DimMismatch(WakegateError, ValueError):
    pass


class WrongChunkSize(WakegateError, ValueError):
    pass


class DegenerateAudio(WakegateError, ValueError):
    pass


class EmptyEnrollment(WakegateError, ValueError):
    pass


class ModelFormatError(WakegateError):
    """Raised when a WGEM/WGFC/WGSP binary file is malformed."""


class AugmentError(WakegateError, ValueError):
    """Invalid augmentation parameters (empty banks, bad bands, silent inputs)."""


class EvalError(WakegateError, ValueError):
    """Raised when a score set cannot be evaluated."""
