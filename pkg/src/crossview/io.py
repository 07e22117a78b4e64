"""File formats: detection/track/ground-truth CSVs, homography and
correspondence text files, match logs, scene bundles and configs.

All writers are deterministic (fixed field order, fixed float formatting:
CSV numbers carry six fractional digits, homography/correspondence files use
full repr precision) so identical inputs produce byte-identical files.
"""

import json
import os
from typing import Optional

import numpy as np

from .geometry import Correspondence, Homography, PixelPoint
from .local_tracker import Detection, OutOfOrderFrame
from .metrics import AnnotatedBox
from .polygons import BoundingBox, InvalidBox
from .simulator import ConfigInvalid, NoiseConfig, PenConfig


class MalformedInput(ValueError):
    """Input file violates its format contract."""


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.6f}"


def _parse_row(line, n_fields, path, line_no):
    parts = [p.strip() for p in line.split(",")]
    if len(parts) != n_fields:
        raise MalformedInput(f"{path}:{line_no}: expected {n_fields} fields, got {len(parts)}")
    return parts


def _parse_floats(parts, path, line_no):
    try:
        return [float(p) for p in parts]
    except ValueError as exc:
        raise MalformedInput(f"{path}:{line_no}: {exc}") from exc


def _data_lines(path):
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield line_no, line


def _is_header(line) -> bool:
    first = line.split(",")[0].strip()
    try:
        float(first)
        return False
    except ValueError:
        return True


# -- detections ---------------------------------------------------------

DETECTION_HEADER = "frame,x_min,y_min,width,height,confidence"


def write_detections(rows, path):
    """rows: (frame, x_min, y_min, width, height, confidence) tuples."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(DETECTION_HEADER + "\n")
        for frame, x, y, w, h, conf in rows:
            fh.write(f"{int(frame)},{_fmt(x)},{_fmt(y)},{_fmt(w)},{_fmt(h)},{_fmt(conf)}\n")


def read_detections(path) -> dict:
    """Detections CSV -> {frame: [Detection, ...]}; frames must be ascending."""
    by_frame: dict[int, list] = {}
    last = None
    for line_no, line in _data_lines(path):
        if line_no == 1 and _is_header(line):
            continue
        parts = _parse_row(line, 6, path, line_no)
        vals = _parse_floats(parts, path, line_no)
        frame = int(vals[0])
        if last is not None and frame < last:
            raise OutOfOrderFrame(f"{path}:{line_no}: frame {frame} after frame {last}")
        last = frame
        x, y, w, h, conf = vals[1:]
        try:
            det = Detection(frame=frame, box=BoundingBox(x, y, x + w, y + h), confidence=conf)
        except (InvalidBox, ValueError) as exc:
            raise MalformedInput(f"{path}:{line_no}: {exc}") from exc
        by_frame.setdefault(frame, []).append(det)
    return by_frame


def read_appearances(path) -> dict:
    """Sidecar CSV frame,det_index,v1..vk -> {(frame, index): unit vector}."""
    vectors = {}
    dim = None
    for line_no, line in _data_lines(path):
        if line_no == 1 and _is_header(line):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) < 3:
            raise MalformedInput(f"{path}:{line_no}: expected frame,det_index,v1..vk")
        vals = _parse_floats(parts, path, line_no)
        vec = np.array(vals[2:])
        if dim is None:
            dim = vec.size
        elif vec.size != dim:
            raise MalformedInput(f"{path}:{line_no}: vector dimension changed from {dim}")
        if abs(np.linalg.norm(vec) - 1.0) > 1e-6:
            raise MalformedInput(f"{path}:{line_no}: appearance vector is not unit-norm")
        vectors[(int(vals[0]), int(vals[1]))] = vec
    return vectors


def attach_appearances(by_frame: dict, vectors: dict) -> dict:
    """Return a copy of {frame: [Detection]} with sidecar vectors attached."""
    out = {}
    for frame, dets in by_frame.items():
        out[frame] = [
            Detection(d.frame, d.box, d.confidence, vectors.get((frame, i), d.appearance))
            for i, d in enumerate(dets)
        ]
    return out


# -- local tracks -------------------------------------------------------

TRACK_HEADER = "frame,local_id,x_min,y_min,width,height"


def write_tracks(rows, path):
    """rows: (frame, local_id, BoundingBox) tuples."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(TRACK_HEADER + "\n")
        for frame, lid, box in rows:
            fh.write(
                f"{int(frame)},{int(lid)},{_fmt(box.x_min)},{_fmt(box.y_min)},"
                f"{_fmt(box.width)},{_fmt(box.height)}\n"
            )


def read_tracks(path) -> list:
    """Track CSV -> [(frame, local_id, BoundingBox)], frames must be ascending."""
    rows = []
    last = None
    for line_no, line in _data_lines(path):
        if line_no == 1 and _is_header(line):
            continue
        parts = _parse_row(line, 6, path, line_no)
        vals = _parse_floats(parts, path, line_no)
        frame = int(vals[0])
        if last is not None and frame < last:
            raise OutOfOrderFrame(f"{path}:{line_no}: frame {frame} after frame {last}")
        last = frame
        x, y, w, h = vals[2:]
        try:
            rows.append((frame, int(vals[1]), BoundingBox(x, y, x + w, y + h)))
        except InvalidBox as exc:
            raise MalformedInput(f"{path}:{line_no}: {exc}") from exc
    return rows


# -- global tracks / ground truth ----------------------------------------

GLOBAL_HEADER = "camera,frame,global_id,x_min,y_min,width,height"


def write_global_tracks(records, path):
    """records: (camera, frame, global_id, BoundingBox) tuples."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(GLOBAL_HEADER + "\n")
        for camera, frame, gid, box in records:
            fh.write(
                f"{camera},{int(frame)},{int(gid)},{_fmt(box.x_min)},{_fmt(box.y_min)},"
                f"{_fmt(box.width)},{_fmt(box.height)}\n"
            )


def write_ground_truth(rows, path):
    """rows: (camera, frame, identity, x_min, y_min, width, height) tuples."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(GLOBAL_HEADER + "\n")
        for camera, frame, gid, x, y, w, h in rows:
            fh.write(
                f"{camera},{int(frame)},{int(gid)},{_fmt(x)},{_fmt(y)},{_fmt(w)},{_fmt(h)}\n"
            )


def read_annotated(path) -> list:
    """Global-track/ground-truth CSV -> [AnnotatedBox]."""
    out = []
    for line_no, line in _data_lines(path):
        if line_no == 1 and _is_header(line):
            continue
        parts = _parse_row(line, 7, path, line_no)
        camera = parts[0]
        vals = _parse_floats(parts[1:], path, line_no)
        x, y, w, h = vals[2:]
        try:
            out.append(
                AnnotatedBox(camera, int(vals[0]), int(vals[1]), BoundingBox(x, y, x + w, y + h))
            )
        except InvalidBox as exc:
            raise MalformedInput(f"{path}:{line_no}: {exc}") from exc
    return out


# -- match sets ----------------------------------------------------------

MATCH_HEADER = "frame,ceiling_local_id,angled_local_id"


def write_matches(match_sets: dict, path):
    """match_sets: {frame: {ceiling_local: angled_local}}."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(MATCH_HEADER + "\n")
        for frame in sorted(match_sets):
            for c_lid, a_lid in sorted(match_sets[frame].items()):
                fh.write(f"{int(frame)},{int(c_lid)},{int(a_lid)}\n")


def read_matches(path) -> dict:
    match_sets: dict[int, dict] = {}
    for line_no, line in _data_lines(path):
        if line_no == 1 and _is_header(line):
            continue
        parts = _parse_row(line, 3, path, line_no)
        vals = _parse_floats(parts, path, line_no)
        match_sets.setdefault(int(vals[0]), {})[int(vals[1])] = int(vals[2])
    return match_sets


# -- homographies & correspondences --------------------------------------


def write_homography(h: Homography, path, comment: Optional[str] = None):
    """Nine whitespace-separated values, row-major, full precision."""
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        for row in h.m:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def read_homography(path) -> Homography:
    values = []
    for line_no, line in _data_lines(path):
        parts = line.split()
        values.extend(_parse_floats(parts, path, line_no))
    if len(values) != 9:
        raise MalformedInput(f"{path}: expected 9 numbers, got {len(values)}")
    return Homography(np.array(values).reshape(3, 3))


def write_correspondences(pairs, path, comment: Optional[str] = None):
    """pairs: Correspondence objects or (src_x, src_y, dst_x, dst_y) tuples."""
    with open(path, "w", encoding="utf-8") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        for pair in pairs:
            if isinstance(pair, Correspondence):
                vals = (pair.src.x, pair.src.y, pair.dst.x, pair.dst.y)
            else:
                vals = tuple(pair)
            fh.write(" ".join(repr(float(v)) for v in vals) + "\n")


def read_correspondences(path) -> list:
    pairs = []
    for line_no, line in _data_lines(path):
        parts = line.split()
        if len(parts) != 4:
            raise MalformedInput(f"{path}:{line_no}: expected 4 numbers per line")
        x0, y0, x1, y1 = _parse_floats(parts, path, line_no)
        pairs.append(Correspondence(PixelPoint(x0, y0), PixelPoint(x1, y1)))
    return pairs


# -- scene bundles -------------------------------------------------------

BUNDLE_FILES = {
    "detections_ceiling": "detections_ceiling.csv",
    "detections_angled": "detections_angled.csv",
    "ground_truth": "ground_truth.csv",
    "homography": "h_ceiling_to_angled.txt",
    "correspondences": "correspondences.txt",
}


def write_bundle(bundle, out_dir) -> dict:
    """Write a SceneBundle to out_dir; returns the manifest dict."""
    os.makedirs(out_dir, exist_ok=True)
    write_detections(
        bundle.detections["ceiling"], os.path.join(out_dir, BUNDLE_FILES["detections_ceiling"])
    )
    write_detections(
        bundle.detections["angled"], os.path.join(out_dir, BUNDLE_FILES["detections_angled"])
    )
    gt_rows = sorted(bundle.ground_truth, key=lambda r: (r[0], r[1], r[2]))
    write_ground_truth(gt_rows, os.path.join(out_dir, BUNDLE_FILES["ground_truth"]))
    write_homography(
        bundle.h_ceiling_to_angled,
        os.path.join(out_dir, BUNDLE_FILES["homography"]),
        comment="true ceiling->angled homography",
    )
    write_correspondences(
        bundle.correspondences,
        os.path.join(out_dir, BUNDLE_FILES["correspondences"]),
        comment="ceiling_x ceiling_y angled_x angled_y",
    )
    manifest = {
        "files": dict(BUNDLE_FILES),
        "scene": {
            "n_agents": bundle.config.n_agents,
            "frames": bundle.config.duration,
            "fps": bundle.config.fps,
            "seed": bundle.config.seed,
            "floor": [bundle.config.floor_width, bundle.config.floor_depth],
        },
    }
    with open(os.path.join(out_dir, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def read_manifest(bundle_dir) -> dict:
    with open(os.path.join(bundle_dir, "manifest.json"), "r", encoding="utf-8") as fh:
        return json.load(fh)


# -- configs -------------------------------------------------------------


def noise_config_from_dict(data: dict) -> NoiseConfig:
    allowed = {"dropout_prob", "jitter_sigma", "false_positive_rate", "merge_prob", "split_prob"}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigInvalid(f"unknown noise field '{sorted(unknown)[0]}'")
    cfg = NoiseConfig(**data)
    cfg.validate()
    return cfg


def pen_config_from_dict(data: dict) -> PenConfig:
    allowed = {
        "floor_width",
        "floor_depth",
        "n_agents",
        "agent_length",
        "agent_width",
        "fps",
        "duration",
        "seed",
        "max_speed",
        "min_separation",
        "noise",
    }
    unknown = set(data) - allowed
    if unknown:
        raise ConfigInvalid(f"unknown scene field '{sorted(unknown)[0]}'")
    data = dict(data)
    noise = data.pop("noise", None)
    try:
        cfg = PenConfig(**data)
    except TypeError as exc:
        raise ConfigInvalid(f"bad scene config: {exc}") from exc
    if noise is not None:
        if not isinstance(noise, dict):
            raise ConfigInvalid("noise must be an object")
        cfg.noise = noise_config_from_dict(noise)
    cfg.validate()
    return cfg


def load_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"{path}: invalid JSON: {exc}") from exc
