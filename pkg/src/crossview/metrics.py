"""Tracking evaluation: MOTA, MOTP, precision/recall, identity metrics and
camera handover accuracy.

Evaluation follows the CLEAR-MOT convention: per (camera, frame), ground
truth and predicted boxes are matched by an IoU-maximizing optimal
assignment over pairs with IoU >= threshold, preferring pairs already
matched in the previous frame. Identity switches count against a ground
truth identity's most recently matched predicted ID. Identity metrics
(IDF1/IDP/IDR) come from a single global min-cost identity mapping.
"""

from dataclasses import dataclass

import numpy as np

from .assignment import hungarian
from .polygons import BoundingBox, iou_matrix


class EmptyGroundTruth(ValueError):
    """No ground truth boxes to evaluate against."""


class NoMatches(ValueError):
    """No matched pairs; localization precision is undefined."""


class NoGroundTruthPairs(ValueError):
    """No frame has a ground truth identity visible in both cameras."""


@dataclass(frozen=True)
class AnnotatedBox:
    camera: str
    frame: int
    identity: int
    box: BoundingBox


@dataclass
class MetricsAccumulator:
    """Additive error counters; accumulators from disjoint (camera, frame)
    ranges may be summed and MOTP recomputed from the summed fields."""

    fn: int = 0
    fp: int = 0
    idsw: int = 0
    gt: int = 0
    pred: int = 0
    matched_overlap_sum: float = 0.0
    matched_count: int = 0

    def __iadd__(self, other: "MetricsAccumulator"):
        self.fn += other.fn
        self.fp += other.fp
        self.idsw += other.idsw
        self.gt += other.gt
        self.pred += other.pred
        self.matched_overlap_sum += other.matched_overlap_sum
        self.matched_count += other.matched_count
        return self


def match_frame(gt_boxes, pred_boxes, iou_threshold: float = 0.5, prev_matches=None):
    """Match one frame's ground truth boxes against predictions.

    gt_boxes/pred_boxes: sequences of (identity, BoundingBox) pairs or
    AnnotatedBox from a single (camera, frame). prev_matches maps gt identity
    -> pred identity from the previous frame; those pairs are kept first when
    still above the IoU threshold, the rest is an optimal IoU-maximizing
    assignment. Returns a list of (gt_index, pred_index, iou) triples.
    """
    gt = [_id_box(b) for b in gt_boxes]
    pred = [_id_box(b) for b in pred_boxes]
    if not gt or not pred:
        return []
    overlap = iou_matrix(
        np.array([b.as_array() for _, b in gt]),
        np.array([b.as_array() for _, b in pred]),
    )
    matched = []
    taken_g = set()
    taken_p = set()
    if prev_matches:
        pred_index = {}
        for pi, (pid, _) in enumerate(pred):
            pred_index.setdefault(pid, pi)
        for gi, (gid, _) in enumerate(gt):
            pid = prev_matches.get(gid)
            if pid is None:
                continue
            pi = pred_index.get(pid)
            if pi is None or pi in taken_p:
                continue
            if overlap[gi, pi] >= iou_threshold:
                matched.append((gi, pi, float(overlap[gi, pi])))
                taken_g.add(gi)
                taken_p.add(pi)
    free_g = [gi for gi in range(len(gt)) if gi not in taken_g]
    free_p = [pi for pi in range(len(pred)) if pi not in taken_p]
    if free_g and free_p:
        sub = overlap[np.ix_(free_g, free_p)]
        pairs = hungarian(-sub, forbidden=sub < iou_threshold)
        for i, j in pairs:
            gi, pi = free_g[i], free_p[j]
            matched.append((gi, pi, float(overlap[gi, pi])))
    matched.sort()
    return matched


def _id_box(item):
    if isinstance(item, AnnotatedBox):
        return item.identity, item.box
    return item[0], item[1]


def _group(stream):
    grouped: dict[tuple, list] = {}
    for b in stream:
        grouped.setdefault((b.camera, b.frame), []).append((b.identity, b.box))
    return grouped


@dataclass
class TrackingScores:
    mota: float
    motp: float
    idf1: float
    idp: float
    idr: float
    precision: float
    recall: float
    counts: MetricsAccumulator
    idtp: int


def evaluate_tracking(gt_stream, pred_stream, iou_threshold: float = 0.5) -> TrackingScores:
    """Score a predicted stream against ground truth (multi-camera).

    Both streams are AnnotatedBox iterables; predicted identities are the
    tracker's global IDs. Cameras are evaluated independently (continuation
    and switch bookkeeping never cross cameras) and summed.
    """
    gt_grouped = _group(gt_stream)
    pred_grouped = _group(pred_stream)
    acc = MetricsAccumulator()
    acc.gt = sum(len(v) for v in gt_grouped.values())
    acc.pred = sum(len(v) for v in pred_grouped.values())
    if acc.gt == 0:
        raise EmptyGroundTruth("ground truth stream has no boxes")

    id_overlap: dict[tuple, int] = {}
    keys = sorted(set(gt_grouped) | set(pred_grouped))
    prev: dict[str, dict] = {}
    last_matched: dict[tuple, int] = {}
    for camera, frame in keys:
        gt = gt_grouped.get((camera, frame), [])
        pred = pred_grouped.get((camera, frame), [])
        if gt and pred:
            overlap = iou_matrix(
                np.array([b.as_array() for _, b in gt]),
                np.array([b.as_array() for _, b in pred]),
            )
            for gi, pi in zip(*np.nonzero(overlap >= iou_threshold)):
                pair = (gt[gi][0], pred[pi][0])
                id_overlap[pair] = id_overlap.get(pair, 0) + 1
        matches = match_frame(gt, pred, iou_threshold, prev.get(camera))
        current: dict[int, int] = {}
        for gi, pi, ov in matches:
            g_id = gt[gi][0]
            p_id = pred[pi][0]
            current[g_id] = p_id
            seen = last_matched.get((camera, g_id))
            if seen is not None and seen != p_id:
                acc.idsw += 1
            last_matched[(camera, g_id)] = p_id
            acc.matched_overlap_sum += ov
            acc.matched_count += 1
        prev[camera] = current
        acc.fn += len(gt) - len(matches)
        acc.fp += len(pred) - len(matches)

    idtp = _identity_match_total(id_overlap)
    mota_val = 1.0 - (acc.fn + acc.fp + acc.idsw) / acc.gt
    motp_val = acc.matched_overlap_sum / acc.matched_count if acc.matched_count else float("nan")
    idp = idtp / acc.pred if acc.pred else 0.0
    idr = idtp / acc.gt
    idf1 = 2.0 * idtp / (acc.gt + acc.pred) if (acc.gt + acc.pred) else 0.0
    precision = acc.matched_count / acc.pred if acc.pred else 0.0
    recall = acc.matched_count / acc.gt
    return TrackingScores(
        mota=mota_val,
        motp=motp_val,
        idf1=idf1,
        idp=idp,
        idr=idr,
        precision=precision,
        recall=recall,
        counts=acc,
        idtp=idtp,
    )


def _identity_match_total(id_overlap: dict) -> int:
    """IDTP: total co-located frames under the best one-to-one identity map."""
    if not id_overlap:
        return 0
    g_ids = sorted({g for g, _ in id_overlap})
    p_ids = sorted({p for _, p in id_overlap})
    weights = np.zeros((len(g_ids), len(p_ids)))
    g_index = {g: i for i, g in enumerate(g_ids)}
    p_index = {p: i for i, p in enumerate(p_ids)}
    for (g, p), count in id_overlap.items():
        weights[g_index[g], p_index[p]] = count
    pairs = hungarian(-weights, forbidden=weights <= 0)
    return int(sum(weights[i, j] for i, j in pairs))


def mota(gt_stream, pred_stream, iou_threshold: float = 0.5) -> float:
    """1 - (FN + FP + IDSW) / GT over the whole stream."""
    return evaluate_tracking(gt_stream, pred_stream, iou_threshold).mota


def motp(gt_stream, pred_stream, iou_threshold: float = 0.5) -> float:
    """Mean IoU over matched pairs, in [iou_threshold, 1]."""
    scores = evaluate_tracking(gt_stream, pred_stream, iou_threshold)
    if scores.counts.matched_count == 0:
        raise NoMatches("no ground truth box was ever matched")
    return scores.motp


def id_metrics(gt_stream, pred_stream, iou_threshold: float = 0.5):
    """(IDF1, IDP, IDR) from the global identity mapping."""
    scores = evaluate_tracking(gt_stream, pred_stream, iou_threshold)
    return scores.idf1, scores.idp, scores.idr


def _frame_identity_map(tracks, gt_at_frame, iou_threshold: float):
    """Map local track ids to gt identities via optimal IoU matching."""
    if not tracks or not gt_at_frame:
        return {}
    gt_items = sorted(gt_at_frame.items())
    matched = match_frame(
        [(identity, box) for identity, box in gt_items],
        tracks,
        iou_threshold,
    )
    return {tracks[pi][0]: gt_items[gi][0] for gi, pi, _ in matched}


def cha(gt_stream, match_sets, ceiling_tracks, angled_tracks,
        iou_threshold: float = 0.5, frame_offset: int = 0,
        cameras=("ceiling", "angled")) -> float:
    """Camera handover accuracy.

    A predicted (ceiling local, angled local) match at ceiling frame f is
    correct when both locals' boxes IoU-match ground truth boxes that carry
    the same ground truth identity; the angled box is read at stream frame
    f + frame_offset and compared against ground truth at f. The score is
    correct matches over all ground-truth cross-view pairs (frames where an
    identity is annotated in both cameras).

    match_sets: {ceiling_frame: {ceiling_local: angled_local}};
    ceiling_tracks/angled_tracks: (frame, local_id, box) rows.
    """
    gt_by_cam: dict[str, dict[int, dict[int, BoundingBox]]] = {c: {} for c in cameras}
    for b in gt_stream:
        if b.camera in gt_by_cam:
            gt_by_cam[b.camera].setdefault(b.frame, {})[b.identity] = b.box

    total = 0
    frames_with_pairs = set()
    for frame, ceil_ids in gt_by_cam[cameras[0]].items():
        ang_ids = gt_by_cam[cameras[1]].get(frame)
        if not ang_ids:
            continue
        shared = set(ceil_ids) & set(ang_ids)
        if shared:
            total += len(shared)
            frames_with_pairs.add(frame)
    if total == 0:
        raise NoGroundTruthPairs("ground truth has no cross-view identity pairs")

    c_by_frame: dict[int, list] = {}
    for frame, lid, box in ceiling_tracks:
        c_by_frame.setdefault(frame, []).append((lid, box))
    a_by_frame: dict[int, list] = {}
    for frame, lid, box in angled_tracks:
        a_by_frame.setdefault(frame, []).append((lid, box))

    correct = 0
    for frame, matches in sorted(match_sets.items()):
        if not matches:
            continue
        c_map = _frame_identity_map(
            sorted(c_by_frame.get(frame, ()), key=lambda p: p[0]),
            gt_by_cam[cameras[0]].get(frame, {}),
            iou_threshold,
        )
        a_map = _frame_identity_map(
            sorted(a_by_frame.get(frame + frame_offset, ()), key=lambda p: p[0]),
            gt_by_cam[cameras[1]].get(frame, {}),
            iou_threshold,
        )
        for c_lid, a_lid in matches.items():
            g = c_map.get(c_lid)
            if g is not None and g == a_map.get(a_lid):
                correct += 1
    return correct / total
