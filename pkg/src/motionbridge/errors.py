"""Exception types shared across the package."""


class MotionBridgeError(Exception):
    """Base class for all motionbridge errors."""


class DimensionMismatchError(MotionBridgeError):
    """Inputs disagree on joint count or matrix shape."""


class TopologyError(MotionBridgeError):
    """Skeleton topology violates its structural invariants."""


class EmptyInputError(MotionBridgeError):
    """An operation received an empty clip, plan, or reference set."""


class NumericOverflowError(MotionBridgeError):
    """A Sinkhorn kernel or scaling vector left the finite float range."""


class DivergenceError(MotionBridgeError):
    """Pose optimization produced a non-finite energy.

    Carries the partial trace so callers can inspect how far the run got.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ClipFormatError(MotionBridgeError):
    """A clip or matrix document failed to parse or validate."""


class UnsupportedFeatureError(ClipFormatError):
    """A BVH file uses channels outside the supported subset."""
