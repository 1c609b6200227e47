"""Exception types raised by the library.

Every error the package raises deliberately derives from TrajkitError so
callers (and the CLI exit-code mapping) can distinguish domain failures
from programming errors.
"""


class TrajkitError(Exception):
    """Base class for all library errors."""


class InvalidConfig(TrajkitError):
    """A config value or structure is invalid (unknown key, bad type, bad range)."""


class ParseError(TrajkitError):
    """A data file could not be parsed; message includes the line number."""


class BehindCamera(TrajkitError):
    """Projection denominator fell below the projection epsilon."""


class EmptyFrame(TrajkitError):
    """A KNN query was issued against a frame with no points."""


class DegenerateDt(TrajkitError):
    """Temporal gap in a gradient computation is not strictly positive."""


class TooFewFrames(TrajkitError):
    """Not enough frames for the requested frame offset."""


class NonMonotoneTimestamps(TrajkitError):
    """Track samples contain duplicate timestamps."""


class InsufficientSamples(TrajkitError):
    """Not enough samples near the requested times."""


class DegenerateVector(TrajkitError):
    """Vector norm below epsilon where a direction is required."""


class TooFewMatches(TrajkitError):
    """Fewer matched pairs than the alignment minimum."""


class DimensionMismatch(TrajkitError):
    """Input dimensions do not match the network layer sizes."""


class TooFewLabels(TrajkitError):
    """Not enough pseudo-labels to train the forecast head."""


class NoOverlap(TrajkitError):
    """Prediction and ground-truth series share no aligned samples."""


class TargetNeverVisible(TrajkitError):
    """Less than 10% of the trajectory projects into the image."""


class OutOfRegime(TrajkitError):
    """Requested miscalibration exceeds the small-perturbation regime."""
