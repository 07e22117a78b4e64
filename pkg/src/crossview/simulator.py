"""Synthetic multi-view pen scenes.

Agents execute a bounded random walk on the floor plane and are observed by
an overhead ("ceiling") camera over one end of the pen and an oblique
("angled") camera over the other, with overlapping fields of view. The
simulator emits per-camera detection streams, ground-truth identities, the
true ceiling-to-angled homography and correspondence files, so the whole
pipeline can be verified against known geometry.

Detection noise is driven by draw arrays that depend only on the seed, not
on the noise parameters: sweeping a probability upward strictly grows the
affected event set (common random numbers), and the ground truth never
changes.
"""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .geometry import Homography, compose, invert


class BehindCamera(ValueError):
    """Point is on or behind the camera plane."""


class DegenerateCamera(ValueError):
    """Camera cannot see the ground plane as a proper homography."""


class ConfigInvalid(ValueError):
    """Scene configuration failed validation; message names the field."""


@dataclass(frozen=True)
class WorldPoint:
    x: float
    y: float
    z: float


@dataclass
class CameraModel:
    """Pinhole camera: intrinsics k, world-to-camera rotation r, translation t.

    Projects p_cam = r @ p_world + t, pixel = dehomogenize(k @ p_cam).
    """

    k: np.ndarray
    r: np.ndarray
    t: np.ndarray
    image_size: tuple = (3840, 2160)

    def __post_init__(self):
        self.k = np.asarray(self.k, dtype=np.float64).reshape(3, 3)
        self.r = np.asarray(self.r, dtype=np.float64).reshape(3, 3)
        self.t = np.asarray(self.t, dtype=np.float64).reshape(3)
        if self.k[0, 0] <= 0 or self.k[1, 1] <= 0:
            raise ConfigInvalid("camera focal length must be positive")
        if np.max(np.abs(self.r.T @ self.r - np.eye(3))) > 1e-9:
            raise ConfigInvalid("camera rotation must be orthonormal")
        if abs(np.linalg.det(self.r) - 1.0) > 1e-9:
            raise ConfigInvalid("camera rotation must be proper (det +1)")

    @classmethod
    def look_at(cls, position, target, focal_px, image_size=(3840, 2160)):
        """Camera at `position` aimed at `target` (both world points, metres).

        focal_px may be a scalar or an (fx, fy) pair; a wide-angle horizontal
        field of view with a tighter vertical one models the pitched cameras.
        """
        position = np.asarray(position, dtype=np.float64)
        forward = np.asarray(target, dtype=np.float64) - position
        norm = np.linalg.norm(forward)
        if norm < 1e-12:
            raise ConfigInvalid("camera target coincides with camera position")
        z_c = forward / norm
        up = np.array([0.0, 0.0, 1.0])
        if abs(z_c @ up) > 1.0 - 1e-9:  # looking straight up/down
            up = np.array([0.0, 1.0, 0.0])
        x_c = np.cross(z_c, up)
        x_c /= np.linalg.norm(x_c)
        y_c = np.cross(z_c, x_c)
        r = np.stack([x_c, y_c, z_c])
        t = -r @ position
        w, h = image_size
        fx, fy = (focal_px, focal_px) if np.isscalar(focal_px) else focal_px
        k = np.array([[fx, 0.0, w / 2.0], [0.0, fy, h / 2.0], [0.0, 0.0, 1.0]])
        return cls(k=k, r=r, t=t, image_size=tuple(image_size))

    @property
    def center(self) -> np.ndarray:
        return -self.r.T @ self.t


def project_world(cam: CameraModel, p) -> tuple:
    """World point -> pixel via k [r|t]; raises BehindCamera at depth <= 0."""
    if isinstance(p, WorldPoint):
        p = (p.x, p.y, p.z)
    v = cam.r @ np.asarray(p, dtype=np.float64) + cam.t
    if v[2] <= 1e-9:
        raise BehindCamera(f"point {tuple(p)} has non-positive depth {v[2]}")
    pix = cam.k @ v
    return (pix[0] / pix[2], pix[1] / pix[2])


def ground_plane_homography(cam: CameraModel) -> Homography:
    """Floor coordinates (X, Y, 1) -> pixels: k @ [r1 r2 t].

    Exact by construction for points with Z = 0.
    """
    m = cam.k @ np.column_stack([cam.r[:, 0], cam.r[:, 1], cam.t])
    try:
        return Homography(m)
    except ValueError as exc:
        raise DegenerateCamera(f"camera sees the floor plane degenerately: {exc}") from exc


def true_cross_homography(ceiling: CameraModel, angled: CameraModel) -> Homography:
    """Ceiling pixels -> angled pixels for floor points."""
    return compose(ground_plane_homography(angled), invert(ground_plane_homography(ceiling)))


@dataclass
class NoiseConfig:
    dropout_prob: float = 0.0
    jitter_sigma: float = 0.0  # pixels
    false_positive_rate: float = 0.0  # expected spurious boxes per frame per camera
    merge_prob: float = 0.0  # adjacent agents emitted as one box
    split_prob: float = 0.0  # one agent emitted as two partial boxes

    def validate(self):
        for name in ("dropout_prob", "merge_prob", "split_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigInvalid(f"noise.{name} must be in [0, 1], got {v}")
        if not 0.0 <= self.false_positive_rate <= 1.0:
            raise ConfigInvalid("noise.false_positive_rate must be in [0, 1]")
        if self.jitter_sigma < 0.0:
            raise ConfigInvalid("noise.jitter_sigma must be >= 0")


CEILING_HEIGHT = 4.0  # metres
ANGLED_HEIGHT = 2.2
CEILING_Y_FRACTION = 0.30  # overhead camera hangs over the near end
CEILING_COVER_FRACTION = 0.36  # half-extent of its view along the pen depth
ANGLED_SETBACK = 2.0  # metres behind the far-end wall
ANGLED_NEAR = 1.7  # nearest visible floor distance from below the camera
ANGLED_FAR_FRACTION = 0.355  # far edge of its view along the pen depth


def default_ceiling_camera(floor_width: float, floor_depth: float) -> CameraModel:
    pos = (floor_width / 2.0, CEILING_Y_FRACTION * floor_depth, CEILING_HEIGHT)
    target = (pos[0], pos[1], 0.0)
    focal = 1080.0 * CEILING_HEIGHT / (CEILING_COVER_FRACTION * floor_depth)
    return CameraModel.look_at(pos, target, focal)


def default_angled_camera(floor_width: float, floor_depth: float) -> CameraModel:
    y0 = floor_depth + ANGLED_SETBACK
    d_near = ANGLED_SETBACK - 0.3  # see slightly past the near wall
    d_far = y0 - ANGLED_FAR_FRACTION * floor_depth
    a_near = math.atan2(ANGLED_HEIGHT, d_near)
    a_far = math.atan2(ANGLED_HEIGHT, d_far)
    pitch = (a_near + a_far) / 2.0
    half_fov = (a_near - a_far) / 2.0
    focal_y = 1080.0 / math.tan(half_fov)
    # wide horizontal FOV so the frustum still spans the pen width close to
    # the near wall (otherwise the wall corners are blind in both views)
    focal_x = 1920.0 * d_near / (0.62 * floor_width + 1.0)
    target = (floor_width / 2.0, y0 - ANGLED_HEIGHT / math.tan(pitch), 0.0)
    return CameraModel.look_at(
        (floor_width / 2.0, y0, ANGLED_HEIGHT), target, (focal_x, focal_y)
    )


@dataclass
class PenConfig:
    floor_width: float = 6.0
    floor_depth: float = 12.0
    n_agents: int = 17
    agent_length: float = 1.0  # metres, along heading
    agent_width: float = 0.4
    fps: float = 15.0
    duration: int = 1800  # frames
    seed: int = 0
    max_speed: float = 0.5  # m/s
    min_separation: float = 1.5  # metres between agent centers
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    ceiling_camera: Optional[CameraModel] = None
    angled_camera: Optional[CameraModel] = None

    def validate(self):
        if self.floor_width <= 0 or self.floor_depth <= 0:
            raise ConfigInvalid("floor_width and floor_depth must be positive")
        if self.n_agents < 1:
            raise ConfigInvalid("n_agents must be >= 1")
        if self.agent_length <= 0 or self.agent_width <= 0:
            raise ConfigInvalid("agent_length and agent_width must be positive")
        if self.fps <= 0:
            raise ConfigInvalid("fps must be positive")
        if self.duration < 1:
            raise ConfigInvalid("duration must be >= 1 frame")
        if self.max_speed <= 0:
            raise ConfigInvalid("max_speed must be positive")
        if self.min_separation <= math.hypot(self.agent_length, self.agent_width) / 2.0:
            raise ConfigInvalid("min_separation must exceed half the footprint diagonal")
        self.noise.validate()

    def cameras(self) -> dict:
        ceiling = self.ceiling_camera or default_ceiling_camera(self.floor_width, self.floor_depth)
        angled = self.angled_camera or default_angled_camera(self.floor_width, self.floor_depth)
        return {"ceiling": ceiling, "angled": angled}


@dataclass
class SceneBundle:
    config: PenConfig
    detections: dict  # camera -> [(frame, x_min, y_min, width, height, confidence)]
    ground_truth: list  # (camera, frame, identity, x_min, y_min, width, height)
    h_ceiling_to_angled: Homography
    correspondences: list  # (ceiling_x, ceiling_y, angled_x, angled_y)
    positions: np.ndarray  # (frames, n_agents, 2) world track, for diagnostics

    def write(self, out_dir):
        from . import io as cvio

        return cvio.write_bundle(self, out_dir)


def _initial_layout(config: PenConfig, rng) -> np.ndarray:
    margin = math.hypot(config.agent_length, config.agent_width) / 2.0 + 0.01
    spacing = config.min_separation * 1.1
    xs = np.arange(margin, config.floor_width - margin + 1e-9, spacing)
    ys = np.arange(margin, config.floor_depth - margin + 1e-9, spacing)
    if xs.size == 0 or ys.size == 0 or xs.size * ys.size < config.n_agents:
        raise ConfigInvalid(
            f"n_agents={config.n_agents} does not fit a "
            f"{config.floor_width}x{config.floor_depth} floor at "
            f"min_separation={config.min_separation}"
        )
    cells = np.array([(x, y) for y in ys for x in xs])
    center = np.array([config.floor_width / 2.0, config.floor_depth / 2.0])
    order = np.argsort(((cells - center) ** 2).sum(axis=1), kind="stable")
    chosen = cells[order[: config.n_agents]]
    jitter = rng.uniform(-0.05, 0.05, size=chosen.shape) * spacing
    return chosen + jitter


def _walk(config: PenConfig, rng):
    """Seeded bounded random walk; returns (frames, n, 2) agent centers and
    (frames, n) body facing angles (rate-limited, so footprints never snap)."""
    n = config.n_agents
    dt = 1.0 / config.fps
    margin = math.hypot(config.agent_length, config.agent_width) / 2.0 + 0.01
    lo = np.array([margin, margin])
    hi = np.array([config.floor_width - margin, config.floor_depth - margin])

    pos = _initial_layout(config, rng)
    heading = rng.uniform(0.0, 2.0 * math.pi, n)
    facing = heading.copy()
    speed = config.max_speed * rng.uniform(0.3, 1.0, n)
    out = np.zeros((config.duration, n, 2))
    out_facing = np.zeros((config.duration, n))

    for f in range(config.duration):
        heading = heading + rng.normal(0.0, 0.25, n)
        speed = np.clip(
            speed + rng.normal(0.0, 0.05 * config.max_speed, n),
            0.1 * config.max_speed,
            config.max_speed,
        )
        step = (speed * dt)[:, None] * np.column_stack([np.cos(heading), np.sin(heading)])
        pos = pos + step
        # reflect at the walls and flip the matching heading component
        for axis, flip in ((0, lambda h: math.pi - h), (1, lambda h: -h)):
            low = pos[:, axis] < lo[axis]
            high = pos[:, axis] > hi[axis]
            pos[low, axis] = 2.0 * lo[axis] - pos[low, axis]
            pos[high, axis] = 2.0 * hi[axis] - pos[high, axis]
            bounced = low | high
            if bounced.any():
                heading[bounced] = flip(heading[bounced])
        # pairwise separation: push overlapping agents apart
        for _ in range(3):
            diff = pos[:, None, :] - pos[None, :, :]
            dist = np.sqrt((diff**2).sum(axis=2))
            np.fill_diagonal(dist, np.inf)
            too_close = dist < config.min_separation
            if not too_close.any():
                break
            with np.errstate(invalid="ignore"):
                unit = diff / dist[:, :, None]
            unit[~np.isfinite(unit)] = 0.0
            overlap = np.where(too_close, config.min_separation - dist, 0.0)
            push = (unit * (overlap[:, :, None] / 2.0)).sum(axis=1)
            pos = np.clip(pos + push, lo, hi)
        # bodies turn toward the walk heading at a bounded rate
        delta = np.mod(heading - facing + math.pi, 2.0 * math.pi) - math.pi
        facing = facing + np.clip(delta, -0.12, 0.12)
        out[f] = pos
        out_facing[f] = facing
    return out, out_facing


def _footprint_corners(centers: np.ndarray, headings: np.ndarray, config: PenConfig):
    """(n, 4, 2) world corners of heading-aligned footprint rectangles."""
    u = np.column_stack([np.cos(headings), np.sin(headings)])
    v = np.column_stack([-np.sin(headings), np.cos(headings)])
    half_l = config.agent_length / 2.0
    half_w = config.agent_width / 2.0
    c = centers[:, None, :]
    lu = half_l * u[:, None, :]
    wv = half_w * v[:, None, :]
    return np.concatenate([c + lu + wv, c + lu - wv, c - lu - wv, c - lu + wv], axis=1)


def _project_corners(cam: CameraModel, corners: np.ndarray):
    """Project (n, 4, 2) floor corners; returns pixel (n, 4, 2) and a
    visibility mask (all corners in front of the camera and inside the image)."""
    n = corners.shape[0]
    world = np.concatenate([corners, np.zeros((n, 4, 1))], axis=2)
    cam_pts = world @ cam.r.T + cam.t
    depth = cam_pts[:, :, 2]
    safe = np.where(depth > 1e-9, depth, np.nan)
    pix = cam_pts[:, :, :2] * (cam.k[0, 0], cam.k[1, 1]) / safe[:, :, None]
    pix += (cam.k[0, 2], cam.k[1, 2])
    w, h = cam.image_size
    visible = (
        (depth > 1e-9).all(axis=1)
        & (pix[:, :, 0] >= 0).all(axis=1)
        & (pix[:, :, 0] <= w).all(axis=1)
        & (pix[:, :, 1] >= 0).all(axis=1)
        & (pix[:, :, 1] <= h).all(axis=1)
    )
    return pix, visible


def _nominal_box_size(cam: CameraModel, config: PenConfig) -> float:
    """Rough pixel scale of an agent box at pen center (for fake positives)."""
    center = np.array([config.floor_width / 2.0, config.floor_depth / 2.0])
    corners = _footprint_corners(center[None, :], np.array([0.7]), config)
    pix, visible = _project_corners(cam, corners)
    if not visible[0]:
        return 120.0
    return float(pix[0, :, 0].max() - pix[0, :, 0].min())


def simulate(config: PenConfig) -> SceneBundle:
    """Generate a full scene bundle; deterministic for a given config."""
    config.validate()
    cams = config.cameras()
    rng_motion = np.random.default_rng([config.seed, 1])
    rng_noise = np.random.default_rng([config.seed, 2])

    positions, facings = _walk(config, rng_motion)

    frames = config.duration
    n = config.n_agents
    noise = config.noise
    cam_names = ("ceiling", "angled")
    # draw shapes depend only on the seed and scene size (common random numbers)
    u_drop = rng_noise.uniform(size=(2, frames, n))
    jitter_n = rng_noise.normal(size=(2, frames, n, 4))
    u_merge = rng_noise.uniform(size=(2, frames, n))
    u_split = rng_noise.uniform(size=(2, frames, n))
    u_frac = rng_noise.uniform(size=(2, frames, n))
    u_fp = rng_noise.uniform(size=(2, frames))
    u_fpbox = rng_noise.uniform(size=(2, frames, 5))

    detections = {name: [] for name in cam_names}
    ground_truth = []
    nominal = {name: _nominal_box_size(cams[name], config) for name in cam_names}

    for f in range(frames):
        corners = _footprint_corners(positions[f], facings[f], config)
        for ci, name in enumerate(cam_names):
            pix, visible = _project_corners(cams[name], corners)
            boxes = {}
            for i in np.flatnonzero(visible):
                xs = pix[i, :, 0]
                ys = pix[i, :, 1]
                box = (float(xs.min()), float(ys.min()), float(xs.max()), float(ys.max()))
                boxes[int(i)] = box
                ground_truth.append(
                    (name, f, int(i) + 1, box[0], box[1], box[2] - box[0], box[3] - box[1])
                )

            emitted = _apply_noise(
                boxes, noise, ci, f,
                u_drop, jitter_n, u_merge, u_split, u_frac, u_fp, u_fpbox,
                nominal[name], cams[name].image_size,
            )
            for x_min, y_min, x_max, y_max, conf in emitted:
                detections[name].append(
                    (f, x_min, y_min, x_max - x_min, y_max - y_min, conf)
                )

    h_true = true_cross_homography(cams["ceiling"], cams["angled"])
    correspondences = _floor_correspondences(cams["ceiling"], cams["angled"], config)
    return SceneBundle(
        config=config,
        detections=detections,
        ground_truth=ground_truth,
        h_ceiling_to_angled=h_true,
        correspondences=correspondences,
        positions=positions,
    )


def _apply_noise(boxes, noise, ci, f, u_drop, jitter_n, u_merge, u_split, u_frac,
                 u_fp, u_fpbox, nominal_size, image_size):
    """Turn noise-free per-agent boxes into emitted detections for one frame."""
    surviving = [i for i in sorted(boxes) if u_drop[ci, f, i] >= noise.dropout_prob]

    emitted = []  # (box4, owner agent index) before jitter
    consumed = set()
    for i in surviving:
        if i in consumed:
            continue
        box = boxes[i]
        if noise.merge_prob > 0.0 and u_merge[ci, f, i] < noise.merge_prob:
            partner = None
            best = 2.5 * nominal_size
            cx = (box[0] + box[2]) / 2.0
            cy = (box[1] + box[3]) / 2.0
            for j in surviving:
                if j == i or j in consumed:
                    continue
                other = boxes[j]
                d = math.hypot((other[0] + other[2]) / 2.0 - cx, (other[1] + other[3]) / 2.0 - cy)
                if d < best:
                    best = d
                    partner = j
            if partner is not None:
                other = boxes[partner]
                consumed.add(partner)
                emitted.append(
                    (
                        (
                            min(box[0], other[0]),
                            min(box[1], other[1]),
                            max(box[2], other[2]),
                            max(box[3], other[3]),
                        ),
                        i,
                    )
                )
                continue
        if noise.split_prob > 0.0 and u_split[ci, f, i] < noise.split_prob:
            frac = 0.45 + 0.1 * u_frac[ci, f, i]
            w = box[2] - box[0]
            h = box[3] - box[1]
            if w >= h:
                cut = box[0] + frac * w
                pad = 0.05 * w
                emitted.append(((box[0], box[1], cut + pad, box[3]), i))
                emitted.append(((cut - pad, box[1], box[2], box[3]), i))
            else:
                cut = box[1] + frac * h
                pad = 0.05 * h
                emitted.append(((box[0], box[1], box[2], cut + pad), i))
                emitted.append(((box[0], cut - pad, box[2], box[3]), i))
            continue
        emitted.append((box, i))

    out = []
    for box, owner in emitted:
        if noise.jitter_sigma > 0.0:
            dx, dy, dw, dh = noise.jitter_sigma * jitter_n[ci, f, owner]
            cx = (box[0] + box[2]) / 2.0 + dx
            cy = (box[1] + box[3]) / 2.0 + dy
            half_w = max((box[2] - box[0]) / 2.0 + 0.5 * dw, 1.0)
            half_h = max((box[3] - box[1]) / 2.0 + 0.5 * dh, 1.0)
            box = (cx - half_w, cy - half_h, cx + half_w, cy + half_h)
        out.append((box[0], box[1], box[2], box[3], 1.0))

    if noise.false_positive_rate > 0.0 and u_fp[ci, f] < noise.false_positive_rate:
        w, h = image_size
        d = u_fpbox[ci, f]
        size = nominal_size * (0.7 + 0.6 * d[2])
        aspect = 0.6 + 0.8 * d[3]
        cx = 0.05 * w + 0.9 * w * d[0]
        cy = 0.05 * h + 0.9 * h * d[1]
        out.append((cx - size / 2.0, cy - size * aspect / 2.0,
                    cx + size / 2.0, cy + size * aspect / 2.0, 0.5))
    return out


def _floor_correspondences(ceiling: CameraModel, angled: CameraModel, config: PenConfig,
                           nx: int = 9, ny: int = 9):
    """Grid of floor points visible in both views, as pixel pairs."""
    xs = np.linspace(0.05 * config.floor_width, 0.95 * config.floor_width, nx)
    ys = np.linspace(0.05 * config.floor_depth, 0.95 * config.floor_depth, ny)
    pts = np.array([(x, y) for y in ys for x in xs])
    corners = pts[:, None, :].repeat(4, axis=1)  # reuse the corner projector
    pix_c, vis_c = _project_corners(ceiling, corners)
    pix_a, vis_a = _project_corners(angled, corners)
    both = vis_c & vis_a
    return [
        (float(pix_c[i, 0, 0]), float(pix_c[i, 0, 1]),
         float(pix_a[i, 0, 0]), float(pix_a[i, 0, 1]))
        for i in np.flatnonzero(both)
    ]
