"""Typed errors raised by parsers, fusion, metrics, and the simulator.

The CLI maps every :class:`ToolkitError` to exit code 2 (validation
failure) and plain ``OSError`` to exit code 1 (I/O failure).
"""


class ToolkitError(Exception):
    """Base class for all domain and validation errors in this package."""


class MalformedInput(ToolkitError):
    """Input document has bad syntax or shape; message carries the location."""


class InvariantViolation(ToolkitError):
    """A value violates its type's invariants (degenerate box, bad score, ...)."""


class UnknownLabel(InvariantViolation):
    """A label string is not one of normal/benign/malignant."""


class UnknownImage(ToolkitError):
    """An image id is referenced that the dataset manifest does not contain."""


class DetectorIdCollision(ToolkitError):
    """The two detection sets given to fusion share a detector_id."""


class MissingWholeImageLabel(ToolkitError):
    """An image has no boxes and no whole-image fallback label."""


class MissingBoxLabel(ToolkitError):
    """A predicted box has no entry in the per-box label file."""


class MissingPrediction(ToolkitError):
    """A manifest image has no predicted label to score."""


class PlacementExhausted(ToolkitError):
    """Background box placement failed repeatedly (ground truth covers image)."""
