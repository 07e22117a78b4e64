"""Detector-agnostic multi-camera multi-object tracking.

Turns per-camera detection streams into globally consistent identities
across overlapping views: planar homography estimation and handover,
Kalman-filtered local tracking, greedy cross-view matching, MOT evaluation
metrics and a synthetic multi-view scene generator for verification.
"""

from ._kernels import active_backend
from .geometry import Correspondence, Homography, PixelPoint
from .polygons import BoundingBox, Quadrilateral

__version__ = "0.1.0"

__all__ = [
    "BoundingBox",
    "Correspondence",
    "Homography",
    "PixelPoint",
    "Quadrilateral",
    "active_backend",
    "__version__",
]
