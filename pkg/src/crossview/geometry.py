"""Homogeneous 2-D projective algebra.

A planar scene seen by two cameras is related by a 3x3 homography. This
module provides the representation (canonical up-to-scale form), point
application, composition/inversion, DLT estimation from correspondences,
RANSAC robust estimation, and the three-view chain used to map an overhead
view into an oblique one through intermediate top-down rectifications.
"""

from typing import NamedTuple, Sequence

import numpy as np

DET_EPS = 1e-12
W_EPS = 1e-12


class PointAtInfinity(ValueError):
    """A point was mapped onto the plane at infinity (w ~ 0)."""


class SingularHomography(ValueError):
    """Matrix is not invertible within tolerance."""


class DegenerateConfiguration(ValueError):
    """Correspondences do not determine a homography (collinear/coincident)."""


class TooFewPoints(ValueError):
    """Fewer correspondences than the minimum of 4."""


class NoConsensus(RuntimeError):
    """RANSAC could not find a consensus set of at least 4 inliers."""


class PixelPoint(NamedTuple):
    x: float
    y: float


class HomogeneousPoint(NamedTuple):
    """Projective plane point; (u, v, w) and (au, av, aw) are the same point."""

    u: float
    v: float
    w: float

    def to_pixel(self) -> PixelPoint:
        if abs(self.w) < W_EPS:
            raise PointAtInfinity(f"{self} has no finite pixel image")
        return PixelPoint(self.u / self.w, self.v / self.w)

    @classmethod
    def from_pixel(cls, p) -> "HomogeneousPoint":
        return cls(float(p[0]), float(p[1]), 1.0)


class Correspondence(NamedTuple):
    src: PixelPoint
    dst: PixelPoint


def _canonicalize(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    norm = np.linalg.norm(m)
    if not np.isfinite(norm) or norm == 0.0:
        raise SingularHomography("matrix has zero or non-finite norm")
    if abs(norm - 1.0) > 1e-12:  # idempotent: reloading a canonical matrix is exact
        m = m / norm
    flat = np.abs(m).ravel()
    if m.ravel()[int(np.argmax(flat))] < 0:
        m = -m
    return m


class Homography:
    """3x3 invertible projective map, stored in canonical form.

    Canonical form: Frobenius norm 1, sign fixed so the largest-magnitude
    element is positive. Any two matrices equal up to scale canonicalize to
    the same array, so matrices can be compared directly.
    """

    __slots__ = ("m",)

    def __init__(self, m):
        m = np.array(m, dtype=np.float64).reshape(3, 3)
        if not np.all(np.isfinite(m)):
            raise ValueError("homography entries must be finite")
        m = _canonicalize(m)
        if abs(np.linalg.det(m)) <= DET_EPS:
            raise SingularHomography("matrix is singular within tolerance")
        m.flags.writeable = False
        self.m = m

    @classmethod
    def identity(cls) -> "Homography":
        return cls(np.eye(3))

    @classmethod
    def translation(cls, tx: float, ty: float) -> "Homography":
        return cls([[1, 0, tx], [0, 1, ty], [0, 0, 1]])

    def distance_to(self, other: "Homography") -> float:
        """Frobenius distance between canonical forms (0 for equal maps)."""
        return float(min(np.linalg.norm(self.m - other.m), np.linalg.norm(self.m + other.m)))

    def __repr__(self):
        return f"Homography({self.m.tolist()})"


def apply(h: Homography, p) -> PixelPoint:
    """Map a pixel point through h: dehomogenize h @ (x, y, 1)."""
    hom = HomogeneousPoint.from_pixel(p)
    u, v, w = h.m @ hom
    return HomogeneousPoint(u, v, w).to_pixel()


def apply_many(h: Homography, pts: np.ndarray) -> np.ndarray:
    """Vectorized apply for an (n, 2) array; rows mapping to infinity raise."""
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    hom = np.column_stack([pts, np.ones(len(pts))])
    out = hom @ h.m.T
    w = out[:, 2]
    if np.any(np.abs(w) < W_EPS):
        raise PointAtInfinity("at least one point maps to infinity")
    return out[:, :2] / w[:, None]


def compose(outer: Homography, inner: Homography) -> Homography:
    """Homography equal to applying inner first, then outer."""
    try:
        return Homography(outer.m @ inner.m)
    except SingularHomography as exc:
        raise SingularHomography(f"composition is singular: {exc}") from exc


def invert(h: Homography) -> Homography:
    return Homography(np.linalg.inv(h.m))


def compose_ceiling_to_angled(
    h_ceiling_to_top: Homography,
    h_angled_to_top: Homography,
    h_topceiling_to_topangled: Homography,
) -> Homography:
    """Chain the two top-down rectifications and their cross map.

    Ceiling pixels -> top-down ceiling -> top-down angled -> angled pixels,
    i.e. inverse(angled-to-top) o (topceiling-to-topangled) o (ceiling-to-top).
    """
    return compose(compose(invert(h_angled_to_top), h_topceiling_to_topangled), h_ceiling_to_top)


def _as_point_arrays(pairs: Sequence) -> tuple[np.ndarray, np.ndarray]:
    src = np.array([[c[0][0], c[0][1]] for c in pairs], dtype=np.float64)
    dst = np.array([[c[1][0], c[1][1]] for c in pairs], dtype=np.float64)
    if not (np.all(np.isfinite(src)) and np.all(np.isfinite(dst))):
        raise ValueError("correspondences must be finite")
    return src, dst


def _hartley_normalization(pts: np.ndarray) -> np.ndarray:
    """Similarity T moving the centroid to the origin and the mean distance
    from it to sqrt(2). Required for numerically stable DLT at 4k pixel scales."""
    centroid = pts.mean(axis=0)
    dist = np.sqrt(((pts - centroid) ** 2).sum(axis=1)).mean()
    if dist < 1e-12:
        raise DegenerateConfiguration("points are coincident")
    s = np.sqrt(2.0) / dist
    return np.array(
        [[s, 0.0, -s * centroid[0]], [0.0, s, -s * centroid[1]], [0.0, 0.0, 1.0]]
    )


def estimate_dlt(pairs: Sequence) -> Homography:
    """Direct linear transform from >= 4 correspondences.

    Minimizes the algebraic residual over Hartley-normalized coordinates;
    exact (to float precision) for noise-free inputs in general position.
    """
    if len(pairs) < 4:
        raise TooFewPoints(f"need at least 4 correspondences, got {len(pairs)}")
    src, dst = _as_point_arrays(pairs)
    t_src = _hartley_normalization(src)
    t_dst = _hartley_normalization(dst)
    n = len(src)
    s_h = np.column_stack([src, np.ones(n)]) @ t_src.T
    d_h = np.column_stack([dst, np.ones(n)]) @ t_dst.T

    a = np.zeros((2 * n, 9))
    a[0::2, 0:3] = -s_h
    a[0::2, 6:9] = d_h[:, [0]] * s_h
    a[1::2, 3:6] = -s_h
    a[1::2, 6:9] = d_h[:, [1]] * s_h

    _, sigma, vt = np.linalg.svd(a)
    # rank must be 8 for a unique solution; sigma has min(2n, 9) entries
    if sigma[7] <= 1e-9 * sigma[0]:
        raise DegenerateConfiguration("correspondences do not determine a unique homography")
    h_norm = vt[-1].reshape(3, 3)
    m = np.linalg.inv(t_dst) @ h_norm @ t_src
    try:
        return Homography(m)
    except SingularHomography as exc:
        raise DegenerateConfiguration(f"estimated matrix is singular: {exc}") from exc


def reprojection_errors(h: Homography, pairs: Sequence) -> np.ndarray:
    """Forward (src -> dst) reprojection error in pixels per correspondence.

    Points carried to infinity get an infinite error.
    """
    src, dst = _as_point_arrays(pairs)
    hom = np.column_stack([src, np.ones(len(src))]) @ h.m.T
    w = hom[:, 2]
    err = np.full(len(src), np.inf)
    ok = np.abs(w) >= W_EPS
    proj = hom[ok, :2] / w[ok, None]
    err[ok] = np.sqrt(((proj - dst[ok]) ** 2).sum(axis=1))
    return err


def estimate_ransac(
    pairs: Sequence,
    threshold_px: float = 3.0,
    iterations: int = 1000,
    seed: int = 0,
) -> tuple[Homography, np.ndarray]:
    """RANSAC homography fit; returns (homography, boolean inlier mask).

    Samples 4-point models, scores by forward reprojection error, keeps the
    largest consensus set and refits it with estimate_dlt. Deterministic for
    a fixed seed: the PRNG is seeded explicitly and ties keep the first-found
    model.
    """
    n = len(pairs)
    if n < 4:
        raise TooFewPoints(f"need at least 4 correspondences, got {n}")
    if threshold_px <= 0:
        raise ValueError("threshold_px must be positive")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    pairs = list(pairs)
    rng = np.random.default_rng(seed)
    best_mask = None
    best_count = 0
    for _ in range(iterations):
        idx = rng.choice(n, size=4, replace=False)
        try:
            model = estimate_dlt([pairs[i] for i in idx])
        except DegenerateConfiguration:
            continue
        err = reprojection_errors(model, pairs)
        mask = err <= threshold_px
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best_mask = mask
    if best_mask is None or best_count < 4:
        raise NoConsensus(f"best consensus set has {best_count} < 4 inliers")
    refit = estimate_dlt([pairs[i] for i in np.flatnonzero(best_mask)])
    return refit, best_mask
