"""Exception hierarchy for the covertower package."""


class CovertowerError(Exception):
    """Base class for all covertower errors."""


class QuantizationError(CovertowerError):
    """Lattice area / tensor power violates the integrality condition."""


class DepthError(CovertowerError):
    """Tower depth is not a positive integer."""


class LevelOutOfRange(CovertowerError):
    """Requested tower level does not exist."""


class TruncationError(CovertowerError):
    """Requested tail tolerance is unreachable within the radius cap."""


class DomainError(CovertowerError):
    """Argument outside the mathematical domain of the operation."""


class DivisionDegenerate(CovertowerError):
    """Denominator of a relative quantity is numerically zero."""


class BaseLocusError(CovertowerError):
    """Kernel diagonal vanished numerically (nonempty base locus)."""


class FrameDegenerate(CovertowerError):
    """Coherent-state Gram matrix is too ill-conditioned to whiten."""


class BoundaryZeroError(CovertowerError):
    """A zero sits on the integration contour and retries were exhausted."""


class NonIntegerWinding(CovertowerError):
    """Boundary phase integral failed to certify an integer winding number."""


class ZeroCountMismatch(CovertowerError):
    """Located zero count disagrees with the line-bundle degree."""


class ClusterUnresolved(CovertowerError):
    """A zero cluster could not be separated above the minimum cell size."""


class ConfigError(CovertowerError):
    """Malformed experiment configuration."""
