"""Exception types raised across the simulator."""


class FedFlipError(Exception):
    """Base class for all fedflip-specific errors."""


class ConfigError(FedFlipError):
    """Invalid experiment configuration (bad key, type, or invariant)."""


class DegenerateTrustError(FedFlipError):
    """All non-malicious trust mass collapsed to zero; the run cannot continue."""


class AggregationStarvedError(FedFlipError):
    """No client is eligible to contribute to the aggregated model."""


class IdxFormatError(FedFlipError, ValueError):
    """Base class for malformed IDX dataset files."""


class IdxMagicError(IdxFormatError):
    """IDX file does not start with the expected magic number."""


class IdxTruncatedError(IdxFormatError):
    """IDX file is shorter than its header declares."""


class IdxCountMismatchError(IdxFormatError):
    """Image and label files disagree on the sample count."""


class IdxLabelError(IdxFormatError):
    """IDX label byte outside the valid class range."""
