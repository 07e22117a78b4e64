import itertools
import math

import numpy as np
import pytest

from crossview.metrics import (
    AnnotatedBox,
    EmptyGroundTruth,
    NoGroundTruthPairs,
    NoMatches,
    cha,
    evaluate_tracking,
    id_metrics,
    match_frame,
    mota,
    motp,
)
from crossview.polygons import BoundingBox, iou


def box(x, y, w=10.0, h=10.0):
    return BoundingBox(x, y, x + w, y + h)


def ann(camera, frame, identity, b):
    return AnnotatedBox(camera, frame, identity, b)


def stream(camera, spec):
    """spec: {frame: {identity: box}} -> [AnnotatedBox]"""
    return [
        ann(camera, frame, identity, b)
        for frame, items in spec.items()
        for identity, b in items.items()
    ]


class TestMatchFrame:
    def test_identical_sets_all_matched(self):
        gt = [(1, box(0, 0)), (2, box(50, 50))]
        assert [(g, p) for g, p, _ in match_frame(gt, gt)] == [(0, 0), (1, 1)]

    def test_empty_predictions(self):
        assert match_frame([(1, box(0, 0))], []) == []

    def test_crossed_ious_maximize_total(self, rng):
        # seeded random frames checked against exhaustive assignment
        for _ in range(40):
            gt = [(i + 1, box(*rng.uniform(0, 40, 2), 20, 20)) for i in range(3)]
            pred = [(i + 1, box(*rng.uniform(0, 40, 2), 20, 20)) for i in range(3)]
            overlap = np.array([[iou(g, p) for _, p in pred] for _, g in gt])
            best = None
            for k in range(4):
                for rows in itertools.combinations(range(3), k):
                    for cols in itertools.permutations(range(3), k):
                        if all(overlap[r, c] >= 0.5 for r, c in zip(rows, cols)):
                            key = (-k, -math.fsum(overlap[r, c] for r, c in zip(rows, cols)))
                            best = key if best is None or key < best else best
            got = match_frame(gt, pred)
            got_key = (-len(got), -math.fsum(ov for _, _, ov in got))
            assert got_key == (best or (0, 0.0))

    def test_continuation_preference(self):
        g = box(0, 0, 20, 20)
        p_better = (7, box(1, 0, 20, 20))  # higher IoU
        p_prev = (9, box(3, 0, 20, 20))  # matched last frame
        gt = [(1, g)]
        fresh = match_frame(gt, [p_better, p_prev])
        assert fresh == [(0, 0, pytest.approx(iou(g, p_better[1])))]
        kept = match_frame(gt, [p_better, p_prev], prev_matches={1: 9})
        assert kept == [(0, 1, pytest.approx(iou(g, p_prev[1])))]

    def test_threshold_gates_pairs(self):
        gt = [(1, box(0, 0, 10, 10))]
        pred = [(5, box(8, 8, 10, 10))]  # IoU ~ 0.026
        assert match_frame(gt, pred) == []


class TestMOTA:
    def test_perfect_tracking(self):
        gt = stream("cam", {f: {1: box(0, 0), 2: box(50, 50)} for f in range(5)})
        assert mota(gt, gt) == 1.0

    def test_no_predictions_is_zero(self):
        gt = stream("cam", {f: {1: box(0, 0)} for f in range(5)})
        assert mota(gt, []) == 0.0

    def test_three_frame_hand_scenario(self):
        # 2 objects x 3 frames (GT = 6); B missed in frame 2 (1 FN);
        # B re-acquired under a new ID in frame 3 (1 IDSW)
        a, b = box(0, 0), box(100, 100)
        gt = stream("cam", {1: {1: a, 2: b}, 2: {1: a, 2: b}, 3: {1: a, 2: b}})
        pred = stream(
            "cam",
            {
                1: {11: a, 12: b},
                2: {11: a},
                3: {11: a, 13: b},
            },
        )
        scores = evaluate_tracking(gt, pred)
        assert (scores.counts.fn, scores.counts.fp, scores.counts.idsw) == (1, 0, 1)
        assert scores.mota == pytest.approx(2.0 / 3.0, abs=1e-12)

    def test_switch_counts_against_most_recent_match(self):
        # ID changes, then changes back: two switches under the convention
        a = box(0, 0)
        gt = stream("cam", {f: {1: a} for f in range(4)})
        pred = stream("cam", {0: {5: a}, 1: {6: a}, 2: {6: a}, 3: {5: a}})
        scores = evaluate_tracking(gt, pred)
        assert scores.counts.idsw == 2

    def test_switch_persists_across_gap(self):
        a = box(0, 0)
        gt = stream("cam", {0: {1: a}, 1: {1: a}, 2: {1: a}})
        pred = stream("cam", {0: {5: a}, 2: {6: a}})  # absent in frame 1
        assert evaluate_tracking(gt, pred).counts.idsw == 1

    def test_can_go_negative(self):
        gt = stream("cam", {0: {1: box(0, 0)}})
        pred = stream(
            "cam", {0: {k: box(200 + 20 * k, 200) for k in range(5)}}
        )
        assert mota(gt, pred) < 0.0

    def test_never_exceeds_one(self, rng):
        for _ in range(20):
            gt = stream(
                "cam",
                {
                    f: {
                        i + 1: box(*rng.uniform(0, 100, 2), 15, 15)
                        for i in range(int(rng.integers(1, 4)))
                    }
                    for f in range(4)
                },
            )
            pred = stream(
                "cam",
                {
                    f: {
                        i + 1: box(*rng.uniform(0, 100, 2), 15, 15)
                        for i in range(int(rng.integers(0, 4)))
                    }
                    for f in range(4)
                },
            )
            assert mota(gt, pred) <= 1.0

    def test_empty_ground_truth_raises(self):
        with pytest.raises(EmptyGroundTruth):
            mota([], stream("cam", {0: {1: box(0, 0)}}))

    def test_duplicate_prediction_increases_fp_never_mota(self):
        a, b = box(0, 0), box(60, 60)
        gt = stream("cam", {f: {1: a, 2: b} for f in range(3)})
        pred = stream("cam", {f: {1: a, 2: b} for f in range(3)})
        base = evaluate_tracking(gt, pred)
        dup = pred + [ann("cam", 1, 99, b)]
        with_dup = evaluate_tracking(gt, dup)
        assert with_dup.counts.fp == base.counts.fp + 1
        assert with_dup.mota <= base.mota


class TestMOTP:
    def test_exact_predictions(self):
        gt = stream("cam", {f: {1: box(0, 0)} for f in range(3)})
        assert motp(gt, gt) == 1.0

    def test_all_pairs_at_half(self):
        g = BoundingBox(0, 0, 2, 2)
        p = BoundingBox(0, 0, 2, 1)  # IoU exactly 0.5
        gt = stream("cam", {f: {1: g} for f in range(4)})
        pred = stream("cam", {f: {1: p} for f in range(4)})
        assert motp(gt, pred) == pytest.approx(0.5, abs=1e-12)

    def test_mixed_overlaps_hand_mean(self):
        g = BoundingBox(0, 0, 2, 2)
        p1 = BoundingBox(0, 0, 2, 2)  # IoU 1.0
        p2 = BoundingBox(0, 0, 2, 1)  # IoU 0.5
        gt = stream("cam", {0: {1: g}, 1: {1: g}})
        pred = [ann("cam", 0, 1, p1), ann("cam", 1, 1, p2)]
        assert motp(gt, pred) == pytest.approx((1.0 + 0.5) / 2.0, abs=1e-12)

    def test_range_invariant(self, rng):
        for _ in range(10):
            g = box(*rng.uniform(0, 50, 2), 20, 20)
            jittered = box(g.x_min + rng.uniform(0, 4), g.y_min + rng.uniform(0, 4), 20, 20)
            gt = stream("cam", {0: {1: g}})
            pred = stream("cam", {0: {1: jittered}})
            try:
                value = motp(gt, pred)
            except NoMatches:
                continue
            assert 0.5 <= value <= 1.0

    def test_no_matches_raises(self):
        gt = stream("cam", {0: {1: box(0, 0)}})
        pred = stream("cam", {0: {1: box(500, 500)}})
        with pytest.raises(NoMatches):
            motp(gt, pred)


def exhaustive_id_metrics(gt, pred, iou_threshold=0.5):
    """Oracle: enumerate every injective identity mapping and maximize IDTP."""
    frames = {}
    for b in gt:
        frames.setdefault((b.camera, b.frame), [[], []])[0].append(b)
    for b in pred:
        frames.setdefault((b.camera, b.frame), [[], []])[1].append(b)
    weights = {}
    for gs, ps in frames.values():
        for g in gs:
            for p in ps:
                if iou(g.box, p.box) >= iou_threshold:
                    weights[(g.identity, p.identity)] = weights.get((g.identity, p.identity), 0) + 1
    g_ids = sorted({b.identity for b in gt})
    p_ids = sorted({b.identity for b in pred})
    best = 0
    for k in range(min(len(g_ids), len(p_ids)) + 1):
        for gsel in itertools.combinations(g_ids, k):
            for psel in itertools.permutations(p_ids, k):
                best = max(
                    best,
                    sum(weights.get((g, p), 0) for g, p in zip(gsel, psel)),
                )
    n_gt, n_pred = len(gt), len(pred)
    idp = best / n_pred if n_pred else 0.0
    idr = best / n_gt if n_gt else 0.0
    idf1 = 2.0 * best / (n_gt + n_pred) if n_gt + n_pred else 0.0
    return idf1, idp, idr


class TestIdMetrics:
    def test_perfect(self):
        gt = stream("cam", {f: {1: box(0, 0), 2: box(50, 50)} for f in range(4)})
        assert id_metrics(gt, gt) == (1.0, 1.0, 1.0)

    def test_disjoint_signals_zero(self):
        gt = stream("cam", {f: {1: box(0, 0)} for f in range(4)})
        pred = stream("cam", {f: {1: box(300, 300)} for f in range(4)})
        assert id_metrics(gt, pred) == (0.0, 0.0, 0.0)

    def test_mid_sequence_switch_vs_exhaustive_oracle(self):
        a, b = box(0, 0), box(100, 100)
        gt = stream("cam", {f: {1: a, 2: b} for f in range(6)})
        pred = []
        for f in range(6):
            pred.append(ann("cam", f, 11, a))
            pred.append(ann("cam", f, 12 if f < 3 else 13, b))
        got = id_metrics(gt, pred)
        expected = exhaustive_id_metrics(gt, pred)
        assert got == pytest.approx(expected, abs=1e-12)

    def test_random_streams_vs_exhaustive_oracle(self, rng):
        for _ in range(10):
            gt = []
            pred = []
            for f in range(4):
                for i in range(2):
                    g = box(*rng.uniform(0, 60, 2), 18, 18)
                    gt.append(ann("cam", f, i + 1, g))
                    if rng.random() < 0.8:
                        pred.append(
                            ann(
                                "cam",
                                f,
                                int(rng.integers(1, 4)) * 10,
                                box(g.x_min + rng.uniform(-3, 3), g.y_min + rng.uniform(-3, 3), 18, 18),
                            )
                        )
            if not pred:
                continue
            got = id_metrics(gt, pred)
            expected = exhaustive_id_metrics(gt, pred)
            assert got == pytest.approx(expected, abs=1e-12)

    def test_harmonic_mean_identity(self, rng):
        for _ in range(15):
            gt = stream(
                "cam",
                {
                    f: {
                        i + 1: box(*rng.uniform(0, 80, 2), 16, 16)
                        for i in range(int(rng.integers(1, 4)))
                    }
                    for f in range(3)
                },
            )
            pred = stream(
                "cam",
                {
                    f: {
                        int(rng.integers(1, 5)): box(*rng.uniform(0, 80, 2), 16, 16)
                    }
                    for f in range(3)
                },
            )
            idf1, idp, idr = id_metrics(gt, pred)
            if idp + idr > 0:
                assert abs(idf1 - 2 * idp * idr / (idp + idr)) < 1e-12
            else:
                assert idf1 == 0.0


class TestCHA:
    def make_scene(self, frames=4, agents=(1, 2)):
        gt = []
        c_tracks = []
        a_tracks = []
        match_sets = {}
        for f in range(frames):
            match_sets[f] = {}
            for i in agents:
                g = box(20.0 * i, 10.0 * i + f)
                gt.append(ann("ceiling", f, i, g))
                gt.append(ann("angled", f, i, g))
                c_tracks.append((f, 100 + i, g))
                a_tracks.append((f, 200 + i, g))
                match_sets[f][100 + i] = 200 + i
        return gt, match_sets, c_tracks, a_tracks

    def test_all_correct(self):
        gt, match_sets, c_tracks, a_tracks = self.make_scene()
        assert cha(gt, match_sets, c_tracks, a_tracks) == 1.0

    def test_no_predictions(self):
        gt, _, c_tracks, a_tracks = self.make_scene()
        empty = {f: {} for f in range(4)}
        assert cha(gt, empty, c_tracks, a_tracks) == 0.0

    def test_planted_failure_fraction(self):
        gt, match_sets, c_tracks, a_tracks = self.make_scene(frames=10)
        # corrupt 3 of 10 frames: swap the two angled assignments
        for f in (2, 5, 8):
            match_sets[f] = {101: 202, 102: 201}
        value = cha(gt, match_sets, c_tracks, a_tracks)
        assert value == pytest.approx((20 - 6) / 20)

    def test_invariant_under_id_relabeling(self):
        gt, match_sets, c_tracks, a_tracks = self.make_scene()
        base = cha(gt, match_sets, c_tracks, a_tracks)
        relabel_c = {101: 901, 102: 555}
        relabel_a = {201: 77, 202: 3}
        relabel_g = {1: 42, 2: 7}
        gt2 = [ann(b.camera, b.frame, relabel_g[b.identity], b.box) for b in gt]
        c2 = [(f, relabel_c[lid], b) for f, lid, b in c_tracks]
        a2 = [(f, relabel_a[lid], b) for f, lid, b in a_tracks]
        ms2 = {
            f: {relabel_c[c]: relabel_a[a] for c, a in m.items()}
            for f, m in match_sets.items()
        }
        assert cha(gt2, ms2, c2, a2) == base

    def test_frame_offset_lookup(self):
        gt, match_sets, c_tracks, a_tracks = self.make_scene()
        shifted_a = [(f + 5, lid, b) for f, lid, b in a_tracks]
        assert cha(gt, match_sets, c_tracks, shifted_a, frame_offset=5) == 1.0
        assert cha(gt, match_sets, c_tracks, shifted_a, frame_offset=0) == 0.0

    def test_no_ground_truth_pairs_raises(self):
        gt = [ann("ceiling", 0, 1, box(0, 0))]  # never visible in angled
        with pytest.raises(NoGroundTruthPairs):
            cha(gt, {0: {}}, [], [])


class TestAccumulatorMerge:
    def test_counts_are_additive(self):
        gt = stream("cam", {f: {1: box(0, 0), 2: box(50, 50)} for f in range(6)})
        pred = stream("cam", {f: {1: box(1, 0), 2: box(50, 50)} for f in range(6)})
        whole = evaluate_tracking(gt, pred).counts
        first = evaluate_tracking(
            [b for b in gt if b.frame < 3], [b for b in pred if b.frame < 3]
        ).counts
        second = evaluate_tracking(
            [b for b in gt if b.frame >= 3], [b for b in pred if b.frame >= 3]
        ).counts
        first += second
        assert (first.fn, first.fp, first.gt, first.pred) == (
            whole.fn,
            whole.fp,
            whole.gt,
            whole.pred,
        )
        assert first.matched_count == whole.matched_count
        assert first.matched_overlap_sum == pytest.approx(whole.matched_overlap_sum)
