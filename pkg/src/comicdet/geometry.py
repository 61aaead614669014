"""Axis-aligned boxes, coordinate-space conversions and the IoU primitive.

Boxes live in continuous pixel coordinates.  Two representations are used
throughout: center form ``(cx, cy, w, h)`` (the native prediction format)
and corner form ``(x_min, y_min, x_max, y_max)`` (the native annotation
format).  The two are exact inverses of each other.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import ConfigError

NETWORK_SIZE = 416


class Label(enum.IntEnum):
    """The two target classes.  Values double as class-channel indices."""

    PANEL = 0
    CHARACTER = 1

    @property
    def display_name(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class Box:
    """Axis-aligned rectangle in center form."""

    cx: float
    cy: float
    w: float
    h: float

    @property
    def area(self) -> float:
        return self.w * self.h

    @property
    def x_min(self) -> float:
        return self.cx - self.w / 2.0

    @property
    def y_min(self) -> float:
        return self.cy - self.h / 2.0

    @property
    def x_max(self) -> float:
        return self.cx + self.w / 2.0

    @property
    def y_max(self) -> float:
        return self.cy + self.h / 2.0

    def corners(self) -> tuple[float, float, float, float]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    @classmethod
    def from_corners(cls, x_min: float, y_min: float, x_max: float, y_max: float) -> "Box":
        return cls(
            cx=(x_min + x_max) / 2.0,
            cy=(y_min + y_max) / 2.0,
            w=x_max - x_min,
            h=y_max - y_min,
        )


@dataclass(frozen=True)
class LabeledBox:
    """A box with its class label and, for predictions, a score."""

    box: Box
    label: Label
    score: float | None = None


@dataclass(frozen=True)
class ImageSpace:
    """Pixel dimensions of the coordinate frame a box lives in."""

    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ConfigError(f"image space must be at least 1x1, got {self.width}x{self.height}")


def iou(a: Box, b: Box) -> float:
    """Intersection over union of two boxes, in [0, 1].

    Boxes sharing only an edge (zero-area intersection) have IoU 0.
    Raises ValueError for degenerate (non-positive area) boxes.
    """
    if a.w <= 0 or a.h <= 0 or b.w <= 0 or b.h <= 0:
        raise ValueError("iou requires boxes with positive width and height")
    ax1, ay1, ax2, ay2 = a.corners()
    bx1, by1, bx2, by2 = b.corners()
    ix = min(ax2, bx2) - max(ax1, bx1)
    iy = min(ay2, by2) - max(ay1, by1)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    # Areas from the same corner values keep the ratio in [0, 1] exactly.
    union = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter
    return inter / union


def to_network_space(b: Box, src: ImageSpace, size: int = NETWORK_SIZE) -> Box:
    """Rescale a box from ``src`` pixels into the ``size`` x ``size`` network frame.

    The resize is anisotropic (independent per-axis scale, no letterboxing),
    so the mapping is an exact bijection with :func:`from_network_space`.
    """
    sx = size / src.width
    sy = size / src.height
    return Box(b.cx * sx, b.cy * sy, b.w * sx, b.h * sy)


def from_network_space(b: Box, dst: ImageSpace, size: int = NETWORK_SIZE) -> Box:
    """Exact inverse of :func:`to_network_space`."""
    sx = dst.width / size
    sy = dst.height / size
    return Box(b.cx * sx, b.cy * sy, b.w * sx, b.h * sy)
