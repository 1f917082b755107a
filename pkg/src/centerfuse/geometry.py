"""Axis-aligned box arithmetic: areas, centers, containment, and IoU.

Coordinates are real-valued pixels (fractional values are legal). Boxes are
corner-format ``(x_min, y_min, x_max, y_max)`` and must have strictly
positive area. Containment tests use closed intervals, so a point on the
boundary counts as inside; in particular ``contains(b, center(b))`` holds
for every valid box.

All operations are pure functions with no shared state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvariantViolation


@dataclass(frozen=True)
class Point:
    """A point in pixel coordinates; both coordinates must be finite."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise InvariantViolation(
                f"point coordinates must be finite, got ({self.x}, {self.y})"
            )


@dataclass(frozen=True)
class Box:
    """An axis-aligned rectangle with strictly positive area."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        coords = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(math.isfinite(c) for c in coords):
            raise InvariantViolation(f"box coordinates must be finite, got {coords}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise InvariantViolation(
                f"box must satisfy x_min < x_max and y_min < y_max, got {coords}"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)


def area(b: Box) -> float:
    """Area of ``b`` in square pixels; strictly positive for valid boxes."""
    return (b.x_max - b.x_min) * (b.y_max - b.y_min)


def center(b: Box) -> Point:
    """Center point of ``b``."""
    return Point((b.x_min + b.x_max) / 2, (b.y_min + b.y_max) / 2)


def contains(b: Box, p: Point) -> bool:
    """True iff ``p`` lies inside ``b``, boundary included."""
    return b.x_min <= p.x <= b.x_max and b.y_min <= p.y <= b.y_max


def intersection_area(a: Box, b: Box) -> float:
    """Overlap area of two boxes; zero when they are disjoint."""
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    return max(0.0, w) * max(0.0, h)


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes, in [0, 1]."""
    inter = intersection_area(a, b)
    return inter / (area(a) + area(b) - inter)
