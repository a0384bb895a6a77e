"""Exception hierarchy shared across modules."""


class SpikedError(Exception):
    """Base class for every error raised by the package."""


class NonConvergence(SpikedError):
    pass


class DegenerateFamily(SpikedError):
    """Leading Gram minor too small to orthonormalise; resample the vectors."""


class DimensionMismatch(SpikedError, ValueError):
    pass


class PoleHit(SpikedError, ZeroDivisionError):
    """Evaluation point coincides with an eigenvalue of the unperturbed matrix."""


class InsideSupport(SpikedError, ValueError):
    pass


class NotDeviating(SpikedError, ValueError):
    pass


class QuantileFailure(SpikedError):
    pass


class BracketFailure(SpikedError):
    pass


class WindowTouchesSpectrum(SpikedError, ValueError):
    pass


class InsufficientTracking(SpikedError, ValueError):
    pass


class TooFewSamples(SpikedError, ValueError):
    pass


class ConfigError(SpikedError, ValueError):
    """Invalid configuration; ``pointer`` is a JSON pointer to the offending key."""

    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        self.message = message
        super().__init__(f"{pointer or '/'}: {message}")
