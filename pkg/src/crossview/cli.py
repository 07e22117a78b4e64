"""Command-line surface: simulate / estimate-homography / track / align /
evaluate / pipeline.

Exit codes: 0 success, 2 configuration error, 3 estimation failure,
4 malformed input. Every subcommand is deterministic given its inputs and
seeds; the only non-deterministic output is the timing summary, which goes
to stderr and never into artifact files.
"""

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field

from . import io as cvio
from .geometry import NoConsensus, TooFewPoints, estimate_ransac
from .global_tracker import GlobalConfig, StreamAlignment, run_global
from .local_tracker import OutOfOrderFrame, Tracker, TrackerConfig
from .metrics import NoGroundTruthPairs, cha, evaluate_tracking
from .simulator import ConfigInvalid, PenConfig, simulate

METRIC_COLUMNS = ("IDF1", "IDP", "IDR", "Recall", "Precision", "MOTA", "MOTP", "CHA")


@dataclass
class RunReport:
    timings: dict = field(default_factory=dict)  # stage -> seconds
    counts: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)

    def to_json(self) -> str:
        # timings stay out of the serialized report so reruns are byte-identical
        return json.dumps(
            {"counts": self.counts, "metrics": self.metrics}, indent=2, sort_keys=True
        )


def _metric_lines(metrics: dict):
    lines = []
    for key in ("mota", "motp", "idf1", "idp", "idr", "precision", "recall", "cha"):
        if key in metrics and metrics[key] is not None:
            lines.append(f"{key}={metrics[key]:.6f}")
    return lines


def _summary_block(metrics: dict) -> str:
    table = {}
    for column in METRIC_COLUMNS:
        table[column] = metrics.get(column.lower())
    return json.dumps(table)


def _scores_dict(scores, cha_value=None) -> dict:
    out = {
        "mota": scores.mota,
        "motp": scores.motp if scores.counts.matched_count else None,
        "idf1": scores.idf1,
        "idp": scores.idp,
        "idr": scores.idr,
        "precision": scores.precision,
        "recall": scores.recall,
        "fn": scores.counts.fn,
        "fp": scores.counts.fp,
        "idsw": scores.counts.idsw,
        "gt": scores.counts.gt,
        "pred": scores.counts.pred,
    }
    out["cha"] = cha_value
    return out


def cmd_simulate(args) -> int:
    config = PenConfig() if args.config is None else cvio.pen_config_from_dict(
        cvio.load_json(args.config)
    )
    if args.seed is not None:
        config.seed = args.seed
        config.validate()
    bundle = simulate(config)
    bundle.write(args.out)
    print(f"wrote scene bundle to {args.out}")
    return 0


def cmd_estimate_homography(args) -> int:
    pairs = cvio.read_correspondences(args.pairs)
    h, mask = estimate_ransac(
        pairs,
        threshold_px=args.ransac_threshold,
        iterations=args.ransac_iters,
        seed=args.seed,
    )
    if args.out:
        cvio.write_homography(h, args.out, comment=f"estimated from {os.path.basename(args.pairs)}")
    else:
        for row in h.m:
            print(" ".join(repr(float(v)) for v in row))
    print(f"inliers={int(mask.sum())} total={len(pairs)}")
    return 0


def _tracker_config(args) -> TrackerConfig:
    return TrackerConfig(
        max_age=args.max_age,
        confirm_hits=args.confirm_hits,
        gate=args.gate,
        motion_weight=args.motion_weight,
    )


def cmd_track(args) -> int:
    by_frame = cvio.read_detections(args.detections)
    if args.appearance:
        by_frame = cvio.attach_appearances(by_frame, cvio.read_appearances(args.appearance))
    tracker = Tracker(_tracker_config(args))
    rows = []
    for frame in sorted(by_frame):
        for lid, box in tracker.step(frame, by_frame[frame]):
            rows.append((frame, lid, box))
    cvio.write_tracks(rows, args.out)
    print(f"tracked {len(rows)} boxes over {len(by_frame)} frames")
    return 0


def cmd_align(args) -> int:
    ceiling = cvio.read_tracks(args.ceiling)
    angled = cvio.read_tracks(args.angled)
    h = cvio.read_homography(args.homography)
    config = GlobalConfig(
        min_area_px2=args.min_area,
        solo_grace=args.solo_grace,
        expiry=args.expiry,
        symmetric=args.symmetric,
    )
    audit = open(args.audit, "w", encoding="utf-8") if args.audit else None
    try:
        result = run_global(
            ceiling, angled, h, StreamAlignment(args.offset), config, audit=audit
        )
    finally:
        if audit:
            audit.close()
    cvio.write_global_tracks(result.records, args.out)
    if args.matches:
        cvio.write_matches(result.match_sets, args.matches)
    print(f"assigned {result.global_ids} global ids over {len(result.match_sets)} frames")
    return 0


def cmd_evaluate(args) -> int:
    gt = cvio.read_annotated(args.gt)
    pred = cvio.read_annotated(args.pred)
    scores = evaluate_tracking(gt, pred, iou_threshold=args.iou_threshold)
    cha_value = None
    if args.matches:
        if not (args.ceiling_tracks and args.angled_tracks):
            raise ConfigInvalid("--matches requires --ceiling-tracks and --angled-tracks")
        match_sets = cvio.read_matches(args.matches)
        try:
            cha_value = cha(
                gt,
                match_sets,
                cvio.read_tracks(args.ceiling_tracks),
                cvio.read_tracks(args.angled_tracks),
                iou_threshold=args.iou_threshold,
                frame_offset=args.offset,
            )
        except NoGroundTruthPairs:
            cha_value = None
    metrics = _scores_dict(scores, cha_value)
    for line in _metric_lines(metrics):
        print(line)
    print(_summary_block(metrics))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    return 0


def _resolve_homography(cfg: dict, scene_dir, out_dir, seed) -> str:
    """Return the path of the homography file to use for alignment."""
    section = cfg.get("homography")
    if section is None:
        if scene_dir is None:
            raise ConfigInvalid("homography: section required when not simulating")
        return os.path.join(scene_dir, cvio.BUNDLE_FILES["homography"])
    if not isinstance(section, dict):
        raise ConfigInvalid("homography: must be an object")
    if "file" in section:
        if section["file"] == "true":
            if scene_dir is None:
                raise ConfigInvalid("homography.file: 'true' requires a simulated scene")
            return os.path.join(scene_dir, cvio.BUNDLE_FILES["homography"])
        return section["file"]
    if "correspondences" in section:
        pairs_path = section["correspondences"]
        if pairs_path == "bundle":
            if scene_dir is None:
                raise ConfigInvalid("homography.correspondences: 'bundle' requires a simulated scene")
            pairs_path = os.path.join(scene_dir, cvio.BUNDLE_FILES["correspondences"])
        pairs = cvio.read_correspondences(pairs_path)
        h, _ = estimate_ransac(
            pairs,
            threshold_px=section.get("threshold_px", 3.0),
            iterations=section.get("iterations", 1000),
            seed=section.get("seed", seed),
        )
        path = os.path.join(out_dir, "h_estimated.txt")
        cvio.write_homography(h, path, comment="estimated by pipeline")
        return path
    raise ConfigInvalid("homography: needs either 'file' or 'correspondences'")


def cmd_pipeline(args) -> int:
    cfg = cvio.load_json(args.config)
    if not isinstance(cfg, dict):
        raise ConfigInvalid("pipeline config must be a JSON object")
    known = {
        "output_dir", "seed", "simulate", "inputs", "homography",
        "alignment", "tracker", "global", "metrics",
    }
    unknown = set(cfg) - known
    if unknown:
        raise ConfigInvalid(f"unknown pipeline field '{sorted(unknown)[0]}'")
    out_dir = args.out or cfg.get("output_dir")
    if not out_dir:
        raise ConfigInvalid("output_dir: required (config field or --out)")
    os.makedirs(out_dir, exist_ok=True)
    seed = cfg.get("seed", 0)
    report = RunReport()

    t0 = time.perf_counter()
    scene_dir = None
    gt_path = None
    if "simulate" in cfg:
        pen_cfg = cvio.pen_config_from_dict(cfg["simulate"])
        bundle = simulate(pen_cfg)
        scene_dir = os.path.join(out_dir, "scene")
        bundle.write(scene_dir)
        det_paths = {
            "ceiling": os.path.join(scene_dir, cvio.BUNDLE_FILES["detections_ceiling"]),
            "angled": os.path.join(scene_dir, cvio.BUNDLE_FILES["detections_angled"]),
        }
        gt_path = os.path.join(scene_dir, cvio.BUNDLE_FILES["ground_truth"])
    elif "inputs" in cfg:
        inputs = cfg["inputs"]
        if not isinstance(inputs, dict):
            raise ConfigInvalid("inputs: must be an object")
        for key in ("ceiling_detections", "angled_detections"):
            if key not in inputs:
                raise ConfigInvalid(f"inputs.{key}: required")
            if not os.path.exists(inputs[key]):
                raise ConfigInvalid(f"inputs.{key}: path does not exist: {inputs[key]}")
        det_paths = {"ceiling": inputs["ceiling_detections"], "angled": inputs["angled_detections"]}
        gt_path = inputs.get("ground_truth")
        if gt_path and not os.path.exists(gt_path):
            raise ConfigInvalid(f"inputs.ground_truth: path does not exist: {gt_path}")
    else:
        raise ConfigInvalid("pipeline config needs either 'simulate' or 'inputs'")
    report.timings["simulate"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    h_path = _resolve_homography(cfg, scene_dir, out_dir, seed)
    h = cvio.read_homography(h_path)
    report.timings["homography"] = time.perf_counter() - t0

    tracker_cfg = TrackerConfig(**cfg.get("tracker", {}))
    t0 = time.perf_counter()
    track_rows = {}
    n_detections = {}
    local_ids = {}
    for camera in ("ceiling", "angled"):
        by_frame = cvio.read_detections(det_paths[camera])
        tracker = Tracker(tracker_cfg)
        rows = []
        for frame in sorted(by_frame):
            for lid, box in tracker.step(frame, by_frame[frame]):
                rows.append((frame, lid, box))
        track_rows[camera] = rows
        n_detections[camera] = sum(len(v) for v in by_frame.values())
        local_ids[camera] = len({lid for _, lid, _ in rows})
        cvio.write_tracks(rows, os.path.join(out_dir, f"tracks_{camera}.csv"))
    report.timings["track"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    global_cfg = GlobalConfig(**cfg.get("global", {}))
    alignment = StreamAlignment(cfg.get("alignment", {}).get("frame_offset", 0))
    result = run_global(track_rows["ceiling"], track_rows["angled"], h, alignment, global_cfg)
    cvio.write_global_tracks(result.records, os.path.join(out_dir, "global_tracks.csv"))
    cvio.write_matches(result.match_sets, os.path.join(out_dir, "matches.csv"))
    report.timings["align"] = time.perf_counter() - t0

    total_local = local_ids["ceiling"] + local_ids["angled"]
    report.counts = {
        "frames": len(result.match_sets),
        "detections_ceiling": n_detections["ceiling"],
        "detections_angled": n_detections["angled"],
        "local_tracks_ceiling": local_ids["ceiling"],
        "local_tracks_angled": local_ids["angled"],
        "global_ids": result.global_ids,
    }
    if result.global_ids > total_local:
        raise AssertionError("internal consistency: global ids exceed local tracks")

    if gt_path:
        t0 = time.perf_counter()
        gt = cvio.read_annotated(gt_path)
        pred = cvio.read_annotated(os.path.join(out_dir, "global_tracks.csv"))
        iou_threshold = cfg.get("metrics", {}).get("iou_threshold", 0.5)
        scores = evaluate_tracking(gt, pred, iou_threshold=iou_threshold)
        try:
            cha_value = cha(
                gt,
                result.match_sets,
                track_rows["ceiling"],
                track_rows["angled"],
                iou_threshold=iou_threshold,
                frame_offset=alignment.frame_offset,
            )
        except NoGroundTruthPairs:
            cha_value = None
        report.metrics = _scores_dict(scores, cha_value)
        report.timings["evaluate"] = time.perf_counter() - t0

    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(report.to_json() + "\n")
    for key, value in report.counts.items():
        print(f"{key}={value}")
    for line in _metric_lines(report.metrics):
        print(line)
    if report.metrics:
        print(_summary_block(report.metrics))
    for stage, seconds in report.timings.items():
        print(f"timing {stage}={seconds:.3f}s", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crossview",
        description="Multi-camera multi-object tracking with homography handover",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic scene bundle")
    p.add_argument("--config", help="scene config JSON (defaults used if omitted)")
    p.add_argument("--out", required=True, help="output bundle directory")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate-homography", help="fit a homography to correspondences")
    p.add_argument("--pairs", required=True, help="correspondence file")
    p.add_argument("--out", help="homography output file (stdout if omitted)")
    p.add_argument("--ransac-threshold", type=float, default=3.0)
    p.add_argument("--ransac-iters", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_estimate_homography)

    p = sub.add_parser("track", help="run the per-camera tracker on a detection CSV")
    p.add_argument("--detections", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--appearance", help="optional appearance sidecar CSV")
    p.add_argument("--max-age", type=int, default=30)
    p.add_argument("--confirm-hits", type=int, default=3)
    p.add_argument("--gate", type=float, default=0.7)
    p.add_argument("--motion-weight", type=float, default=1.0)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("align", help="assign global ids across two track streams")
    p.add_argument("--ceiling", required=True)
    p.add_argument("--angled", required=True)
    p.add_argument("--homography", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--matches", help="write per-frame match pairs CSV")
    p.add_argument("--audit", help="write the greedy pop sequence log")
    p.add_argument("--offset", type=int, default=0, help="angled frame = ceiling frame + offset")
    p.add_argument("--min-area", type=float, default=0.0)
    p.add_argument("--solo-grace", type=int, default=15)
    p.add_argument("--expiry", type=int, default=150)
    p.add_argument("--symmetric", action="store_true")
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("evaluate", help="score predictions against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--matches", help="match pairs CSV for handover accuracy")
    p.add_argument("--ceiling-tracks")
    p.add_argument("--angled-tracks")
    p.add_argument("--offset", type=int, default=0)
    p.add_argument("--iou-threshold", type=float, default=0.5)
    p.add_argument("--out", help="write metrics JSON")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pipeline", help="simulate/ingest, track, align and evaluate")
    p.add_argument("--config", required=True, help="pipeline config JSON")
    p.add_argument("--out", help="output directory (overrides config output_dir)")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"config error: missing file: {exc}", file=sys.stderr)
        return 2
    except (NoConsensus, TooFewPoints) as exc:
        print(f"estimation failed: {exc}", file=sys.stderr)
        return 3
    except (cvio.MalformedInput, OutOfOrderFrame) as exc:
        print(f"malformed input: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
