"""Exception types shared across the package."""


class RangingError(Exception):
    """Base class for errors raised by this package."""


class CaptureFormatError(RangingError):
    """Raised when an IQ file or its binary layout is malformed."""


class MetadataError(RangingError):
    """Raised when a capture's sidecar metadata is missing or inconsistent."""


class SsbNotFoundError(RangingError):
    """Raised when no SSB clears the detection threshold.

    Carries the normalized correlation trace of the best PSS candidate so
    callers can inspect why detection failed.
    """

    def __init__(self, message, metric_trace=None, threshold_ratio=None):
        super().__init__(message)
        self.metric_trace = metric_trace
        self.threshold_ratio = threshold_ratio
