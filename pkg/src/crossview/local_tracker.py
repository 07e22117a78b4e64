"""Per-camera tracking-by-detection.

Constant-velocity Kalman filters over (cx, cy, aspect, height) states, gated
IoU assignment of detections to tracks, and the tentative/confirmed track
lifecycle. Produces locally unique integer track IDs per camera stream.
Appearance vectors, when supplied with the detections, blend into the
assignment cost; by default the tracker is pure-motion.
"""

from dataclasses import dataclass, replace
from typing import NamedTuple, Optional

import numpy as np

from .assignment import hungarian  # noqa: F401  (assignment is part of this module's surface)
from .polygons import BoundingBox, iou_matrix

TENTATIVE = "tentative"
CONFIRMED = "confirmed"


class OutOfOrderFrame(ValueError):
    """Frames must be presented in increasing order."""


class NonPositiveBox(ValueError):
    """Measurement box has non-positive width or height."""


@dataclass(frozen=True)
class Detection:
    frame: int
    box: BoundingBox
    confidence: float = 1.0
    appearance: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.frame < 0:
            raise ValueError(f"frame must be >= 0, got {self.frame}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must be in [0, 1], got {self.confidence}")
        if self.appearance is not None:
            vec = np.asarray(self.appearance, dtype=np.float64).ravel()
            norm = np.linalg.norm(vec)
            if abs(norm - 1.0) > 1e-6:
                raise ValueError(f"appearance vector must be unit-norm, |v| = {norm}")
            object.__setattr__(self, "appearance", vec)


@dataclass
class TrackerConfig:
    max_age: int = 30  # 2 s at 15 fps
    confirm_hits: int = 3
    gate: float = 0.7
    motion_weight: float = 1.0  # alpha; 1.0 = ignore appearance
    gallery_size: int = 50
    position_noise: float = 1.0 / 20.0
    velocity_noise: float = 1.0 / 160.0


class KalmanFilter:
    """Constant-velocity filter on (cx, cy, aspect, height) + velocities.

    Pixel-channel noise scales with the box height so the same weights work
    across image resolutions. The aspect channel gets real dynamics (not the
    frozen pedestrian convention): axis-aligned hulls of turning bodies
    genuinely change aspect, and a filter that cannot follow loses the track
    to the assignment gate.
    """

    # unitless aspect-ratio channel
    ASPECT_STD = 5e-2
    ASPECT_VEL_STD = 1e-3
    ASPECT_MEAS_STD = 5e-2
    ASPECT_INIT_STD = 1e-1

    def __init__(self, position_noise=1.0 / 20.0, velocity_noise=1.0 / 160.0):
        self._wp = position_noise
        self._wv = velocity_noise
        self.motion = np.eye(8)
        for i in range(4):
            self.motion[i, i + 4] = 1.0
        self.project_m = np.eye(4, 8)

    def initiate(self, measurement):
        mean = np.zeros(8)
        mean[:4] = measurement
        h = measurement[3]
        std = [
            2 * self._wp * h,
            2 * self._wp * h,
            self.ASPECT_INIT_STD,
            2 * self._wp * h,
            10 * self._wv * h,
            10 * self._wv * h,
            10 * self.ASPECT_VEL_STD,
            10 * self._wv * h,
        ]
        cov = np.diag(np.square(std))
        return mean, cov

    def predict(self, mean, cov):
        h = mean[3]
        std = [
            self._wp * h,
            self._wp * h,
            self.ASPECT_STD,
            self._wp * h,
            self._wv * h,
            self._wv * h,
            self.ASPECT_VEL_STD,
            self._wv * h,
        ]
        q = np.diag(np.square(std))
        mean = self.motion @ mean
        cov = self.motion @ cov @ self.motion.T + q
        return mean, cov

    def measurement_noise(self, mean):
        h = mean[3]
        std = [self._wp * h, self._wp * h, self.ASPECT_MEAS_STD, self._wp * h]
        return np.diag(np.square(std))

    def update(self, mean, cov, measurement):
        r = self.measurement_noise(mean)
        hm = self.project_m
        projected_cov = hm @ cov @ hm.T + r
        gain = np.linalg.solve(projected_cov.T, (cov @ hm.T).T).T
        innovation = measurement - hm @ mean
        new_mean = mean + gain @ innovation
        # Joseph form keeps the covariance symmetric PSD under roundoff
        a = np.eye(8) - gain @ hm
        new_cov = a @ cov @ a.T + gain @ r @ gain.T
        new_cov = (new_cov + new_cov.T) * 0.5
        return new_mean, new_cov


def measurement_from_box(box: BoundingBox) -> np.ndarray:
    w = box.width
    h = box.height
    if w <= 0 or h <= 0:
        raise NonPositiveBox(f"degenerate measurement {box}")
    return np.array([box.x_min + w / 2.0, box.y_min + h / 2.0, w / h, h])


class TrackState(NamedTuple):
    """Filter state: 8-vector mean (cx, cy, aspect, height + velocities) and
    its 8x8 covariance."""

    mean: np.ndarray
    covariance: np.ndarray


@dataclass(frozen=True)
class Track:
    local_id: int
    mean: np.ndarray
    covariance: np.ndarray
    status: str
    hits: int
    time_since_update: int
    box: BoundingBox  # last matched detection box; what the tracker reports
    gallery: tuple = ()

    @property
    def state(self) -> TrackState:
        return TrackState(self.mean, self.covariance)

    def predicted_box(self) -> BoundingBox:
        """Box under the current (predicted) filter state, used for gating."""
        cx, cy, aspect, h = self.mean[:4]
        h = max(float(h), 1e-3)
        w = max(float(aspect) * h, 1e-3)
        return BoundingBox(cx - w / 2.0, cy - h / 2.0, cx + w / 2.0, cy + h / 2.0)


def predict(track: Track, kf: KalmanFilter) -> Track:
    """Advance one frame under the constant-velocity model."""
    mean, cov = kf.predict(track.mean, track.covariance)
    return replace(track, mean=mean, covariance=cov, time_since_update=track.time_since_update + 1)


def update(track: Track, detection: Detection, kf: KalmanFilter, config: TrackerConfig) -> Track:
    """Kalman measurement update; confirms the track once it has enough hits."""
    mean, cov = kf.update(track.mean, track.covariance, measurement_from_box(detection.box))
    hits = track.hits + 1
    status = track.status
    if status == TENTATIVE and hits >= config.confirm_hits:
        status = CONFIRMED
    gallery = track.gallery
    if detection.appearance is not None:
        gallery = (gallery + (detection.appearance,))[-config.gallery_size :]
    return replace(
        track,
        mean=mean,
        covariance=cov,
        status=status,
        hits=hits,
        time_since_update=0,
        box=detection.box,
        gallery=gallery,
    )


def assign(tracks, detections, config: TrackerConfig):
    """Gated assignment of detections to tracks.

    Cost is 1 - IoU(predicted box, detection box); when a track has an
    appearance gallery and the detection carries a vector, the cosine
    distance to the nearest gallery entry blends in with weight
    (1 - motion_weight). Pairs costing more than the gate are forbidden.
    Returns (matches, unmatched_track_indices, unmatched_detection_indices).
    """
    if not tracks or not detections:
        return [], list(range(len(tracks))), list(range(len(detections)))
    track_boxes = np.array([t.predicted_box().as_array() for t in tracks])
    det_boxes = np.array([d.box.as_array() for d in detections])
    cost = 1.0 - iou_matrix(track_boxes, det_boxes)
    alpha = config.motion_weight
    if alpha < 1.0:
        for ti, t in enumerate(tracks):
            if not t.gallery:
                continue
            gal = np.stack(t.gallery)
            for di, d in enumerate(detections):
                if d.appearance is None:
                    continue
                cos_dist = 1.0 - float(np.max(gal @ d.appearance))
                cost[ti, di] = alpha * cost[ti, di] + (1.0 - alpha) * cos_dist
    matches = hungarian(cost, forbidden=cost > config.gate)
    matched_t = {t for t, _ in matches}
    matched_d = {d for _, d in matches}
    unmatched_t = [i for i in range(len(tracks)) if i not in matched_t]
    unmatched_d = [i for i in range(len(detections)) if i not in matched_d]
    return matches, unmatched_t, unmatched_d


class Tracker:
    """Single-camera tracker; feed frames in increasing order via step().

    An instance is single-writer: one stream, sequential frames. Independent
    camera streams run concurrently in separate instances.
    """

    def __init__(self, config: Optional[TrackerConfig] = None):
        self.config = config or TrackerConfig()
        self.kf = KalmanFilter(self.config.position_noise, self.config.velocity_noise)
        self.tracks: list[Track] = []
        self._next_id = 1
        self._last_frame: Optional[int] = None

    def _new_track(self, detection: Detection) -> Track:
        mean, cov = self.kf.initiate(measurement_from_box(detection.box))
        status = CONFIRMED if self.config.confirm_hits <= 1 else TENTATIVE
        gallery = (detection.appearance,) if detection.appearance is not None else ()
        track = Track(
            local_id=self._next_id,
            mean=mean,
            covariance=cov,
            status=status,
            hits=1,
            time_since_update=0,
            box=detection.box,
            gallery=gallery,
        )
        self._next_id += 1
        return track

    def step(self, frame: int, detections) -> list:
        """Process one frame of detections.

        Coasts through skipped frame numbers (predict-only), assigns, updates
        matched tracks, spawns tentative tracks for unmatched detections and
        drops tracks unseen longer than max_age. Returns the confirmed tracks
        updated this frame as (local_id, BoundingBox) pairs sorted by id.
        """
        if self._last_frame is not None and frame <= self._last_frame:
            raise OutOfOrderFrame(f"frame {frame} after frame {self._last_frame}")
        ticks = 1 if self._last_frame is None else frame - self._last_frame
        self._last_frame = frame

        for _ in range(ticks):
            self.tracks = [predict(t, self.kf) for t in self.tracks]
            self.tracks = [t for t in self.tracks if t.time_since_update <= self.config.max_age]

        detections = list(detections)
        matches, _, unmatched_d = assign(self.tracks, detections, self.config)
        for ti, di in matches:
            self.tracks[ti] = update(self.tracks[ti], detections[di], self.kf, self.config)
        for di in unmatched_d:
            self.tracks.append(self._new_track(detections[di]))

        out = [
            (t.local_id, t.box)
            for t in self.tracks
            if t.status == CONFIRMED and t.time_since_update == 0
        ]
        out.sort(key=lambda item: item[0])
        return out


def track_stream(frames, config: Optional[TrackerConfig] = None):
    """Run a tracker over {frame: [Detection, ...]} and collect all outputs.

    Returns a list of (frame, local_id, BoundingBox) rows sorted by frame.
    """
    tracker = Tracker(config)
    rows = []
    for frame in sorted(frames):
        for local_id, box in tracker.step(frame, frames[frame]):
            rows.append((frame, local_id, box))
    return rows
