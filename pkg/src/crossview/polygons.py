"""Boxes, projected quadrilaterals, and overlap areas.

An axis-aligned detection box projected through a homography becomes a
quadrilateral; cross-view matching scores pairs by the pixel area of
quad-box intersections (Sutherland-Hodgman clipping + shoelace area).
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .geometry import Homography, apply_many


class InvalidBox(ValueError):
    """Box violates x_min < x_max, y_min < y_max or has non-finite fields."""


class TooFewVertices(ValueError):
    """A polygon needs at least 3 vertices."""


@dataclass(frozen=True)
class BoundingBox:
    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        vals = (self.x_min, self.y_min, self.x_max, self.y_max)
        if not all(np.isfinite(v) for v in vals):
            raise InvalidBox(f"non-finite box {vals}")
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise InvalidBox(f"empty or inverted box {vals}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def corners(self) -> np.ndarray:
        """TL, TR, BR, BL corner array, shape (4, 2)."""
        return np.array(
            [
                [self.x_min, self.y_min],
                [self.x_max, self.y_min],
                [self.x_max, self.y_max],
                [self.x_min, self.y_max],
            ],
            dtype=np.float64,
        )

    def as_array(self) -> np.ndarray:
        return np.array([self.x_min, self.y_min, self.x_max, self.y_max], dtype=np.float64)


@dataclass(frozen=True)
class Quadrilateral:
    """Projected box corners in source order (TL, TR, BR, BL images).

    May be non-convex under strong perspective; area is always >= 0.
    """

    vertices: tuple

    def __post_init__(self):
        if len(self.vertices) != 4:
            raise ValueError("a quadrilateral has exactly 4 vertices")
        if not all(np.isfinite(v[0]) and np.isfinite(v[1]) for v in self.vertices):
            raise ValueError("quadrilateral vertices must be finite")

    def as_array(self) -> np.ndarray:
        return np.array(self.vertices, dtype=np.float64).reshape(4, 2)

    @property
    def area(self) -> float:
        return float(_kernels.polygon_area(self.as_array()))


def project_box(h: Homography, b: BoundingBox) -> Quadrilateral:
    """Apply h to each corner of b, preserving corner order.

    Raises PointAtInfinity when the box straddles the horizon line of h.
    """
    mapped = apply_many(h, b.corners())
    return Quadrilateral(tuple((float(x), float(y)) for x, y in mapped))


def polygon_area(vertices) -> float:
    """|shoelace sum| / 2 of a polygon given as a vertex sequence."""
    pts = np.asarray(vertices, dtype=np.float64).reshape(-1, 2)
    if pts.shape[0] < 3:
        raise TooFewVertices(f"polygon needs >= 3 vertices, got {pts.shape[0]}")
    return float(_kernels.polygon_area(pts))


def intersection_area(q: Quadrilateral, b: BoundingBox) -> float:
    """Pixel area of q clipped to b (0 when disjoint)."""
    return float(_kernels.quad_box_intersection_area(q.as_array(), b.as_array()))


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union of two boxes, in [0, 1]."""
    w = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    h = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if w <= 0.0 or h <= 0.0:
        return 0.0
    inter = w * h
    return inter / (a.area + b.area - inter)


def iou_matrix(boxes_a, boxes_b) -> np.ndarray:
    """Pairwise IoU for two (n, 4) / (m, 4) arrays of x_min,y_min,x_max,y_max."""
    a = np.asarray(boxes_a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(boxes_b, dtype=np.float64).reshape(-1, 4)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros((a.shape[0], b.shape[0]))
    w = np.minimum(a[:, None, 2], b[None, :, 2]) - np.maximum(a[:, None, 0], b[None, :, 0])
    h = np.minimum(a[:, None, 3], b[None, :, 3]) - np.maximum(a[:, None, 1], b[None, :, 1])
    inter = np.clip(w, 0.0, None) * np.clip(h, 0.0, None)
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    return np.where(inter > 0.0, inter / union, 0.0)
