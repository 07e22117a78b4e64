import math

import numpy as np
import pytest

from crossview.geometry import Correspondence, PixelPoint, apply, estimate_dlt
from crossview.polygons import BoundingBox, project_box
from crossview.simulator import (
    BehindCamera,
    CameraModel,
    ConfigInvalid,
    DegenerateCamera,
    NoiseConfig,
    PenConfig,
    ground_plane_homography,
    project_world,
    simulate,
    true_cross_homography,
)
from crossview import _kernels


def unit_camera():
    return CameraModel(k=np.eye(3), r=np.eye(3), t=np.zeros(3), image_size=(2, 2))


class TestProjectWorld:
    def test_optical_axis(self):
        assert project_world(unit_camera(), (0.0, 0.0, 1.0)) == (0.0, 0.0)

    def test_pinhole_ratio(self):
        assert project_world(unit_camera(), (1.0, 0.0, 1.0)) == (1.0, 0.0)
        assert project_world(unit_camera(), (2.0, 4.0, 2.0)) == (1.0, 2.0)

    def test_behind_camera(self):
        with pytest.raises(BehindCamera):
            project_world(unit_camera(), (0.0, 0.0, -1.0))
        with pytest.raises(BehindCamera):
            project_world(unit_camera(), (0.0, 0.0, 0.0))

    def test_matrix_multiply_oracle(self, rng):
        cam = CameraModel.look_at(
            position=rng.uniform(1, 3, 3) + (0, 0, 3), target=(2.0, 2.0, 0.0),
            focal_px=1500.0,
        )
        for _ in range(20):
            p = rng.uniform(0, 4, 3)
            # independent oracle: explicit 3x4 projection matrix
            mat = cam.k @ np.column_stack([cam.r, cam.t])
            hom = mat @ np.append(p, 1.0)
            expected = (hom[0] / hom[2], hom[1] / hom[2])
            assert np.allclose(project_world(cam, p), expected, rtol=1e-12)

    def test_rotation_validation(self):
        bad = np.eye(3)
        bad[0, 0] = 2.0
        with pytest.raises(ConfigInvalid):
            CameraModel(k=np.eye(3), r=bad, t=np.zeros(3))

    def test_reflection_rejected(self):
        mirror = np.diag([1.0, 1.0, -1.0])
        with pytest.raises(ConfigInvalid):
            CameraModel(k=np.eye(3), r=mirror, t=np.zeros(3))


class TestGroundPlaneHomography:
    def test_matches_projection_on_floor_points(self, rng):
        cam = CameraModel.look_at((3.0, 14.0, 2.2), (3.0, 6.0, 0.0), 2000.0)
        h = ground_plane_homography(cam)
        for _ in range(10):
            x, y = rng.uniform(0, 12, 2)
            expected = project_world(cam, (x, y, 0.0))
            got = apply(h, (x, y))
            assert np.hypot(got.x - expected[0], got.y - expected[1]) < 1e-9

    def test_overhead_camera_is_similarity(self):
        cam = CameraModel.look_at((3.0, 6.0, 4.0), (3.0, 6.0, 0.0), 1000.0)
        h = ground_plane_homography(cam)
        # no projective part: last row proportional to (0, 0, 1)
        assert abs(h.m[2, 0]) < 1e-12 and abs(h.m[2, 1]) < 1e-12
        for corner in [(0.0, 0.0), (6.0, 0.0), (6.0, 12.0), (0.0, 12.0)]:
            expected = project_world(cam, (*corner, 0.0))
            got = apply(h, corner)
            assert np.allclose((got.x, got.y), expected, atol=1e-9)

    def test_parallel_translation_changes_last_column_only(self):
        cam1 = CameraModel.look_at((3.0, 14.0, 2.2), (3.0, 6.0, 0.0), 2000.0)
        cam2 = CameraModel(
            k=cam1.k, r=cam1.r, t=cam1.t - cam1.r @ np.array([0.5, -0.3, 0.0]),
            image_size=cam1.image_size,
        )
        h1 = ground_plane_homography(cam1).m
        h2 = ground_plane_homography(cam2).m
        # first two columns equal up to the canonical scale factor
        scale = np.linalg.norm(h1[:, :2]) / np.linalg.norm(h2[:, :2])
        assert np.allclose(h1[:, :2], h2[:, :2] * scale, atol=1e-9)
        assert not np.allclose(h1[:, 2], h2[:, 2] * scale, atol=1e-6)

    def test_camera_on_floor_plane_degenerate(self):
        cam = CameraModel.look_at((0.0, 0.0, 0.0), (5.0, 5.0, 0.0), 1000.0)
        with pytest.raises(DegenerateCamera):
            ground_plane_homography(cam)


class TestSimulate:
    def test_single_agent_visible_everywhere(self):
        cfg = PenConfig(n_agents=1, duration=10, seed=3)
        bundle = simulate(cfg)
        assert len(bundle.detections["ceiling"]) == 10
        assert len(bundle.detections["angled"]) == 10
        identities = {row[2] for row in bundle.ground_truth}
        assert identities == {1}
        assert len(bundle.ground_truth) == 20

    def test_full_dropout_empties_detections_keeps_gt(self):
        cfg = PenConfig(
            n_agents=3, duration=8, seed=3, noise=NoiseConfig(dropout_prob=1.0)
        )
        bundle = simulate(cfg)
        assert bundle.detections["ceiling"] == []
        assert bundle.detections["angled"] == []
        assert len(bundle.ground_truth) > 0

    def test_deterministic_rerun(self):
        cfg = PenConfig(n_agents=5, duration=30, seed=9,
                        noise=NoiseConfig(dropout_prob=0.2, jitter_sigma=2.0))
        b1 = simulate(cfg)
        b2 = simulate(PenConfig(n_agents=5, duration=30, seed=9,
                                noise=NoiseConfig(dropout_prob=0.2, jitter_sigma=2.0)))
        assert b1.detections == b2.detections
        assert b1.ground_truth == b2.ground_truth
        assert np.array_equal(b1.positions, b2.positions)
        assert np.array_equal(b1.h_ceiling_to_angled.m, b2.h_ceiling_to_angled.m)

    def test_ground_truth_unaffected_by_noise(self):
        clean = simulate(PenConfig(n_agents=4, duration=20, seed=5))
        noisy = simulate(
            PenConfig(n_agents=4, duration=20, seed=5,
                      noise=NoiseConfig(dropout_prob=0.5, jitter_sigma=4.0))
        )
        assert clean.ground_truth == noisy.ground_truth

    def test_dropout_events_nest_with_probability(self):
        light = simulate(
            PenConfig(n_agents=6, duration=40, seed=7, noise=NoiseConfig(dropout_prob=0.1))
        )
        heavy = simulate(
            PenConfig(n_agents=6, duration=40, seed=7, noise=NoiseConfig(dropout_prob=0.3))
        )
        for cam in ("ceiling", "angled"):
            light_set = set(light.detections[cam])
            heavy_set = set(heavy.detections[cam])
            assert heavy_set <= light_set

    def test_agents_stay_inside_pen(self):
        cfg = PenConfig(n_agents=8, duration=120, seed=13)
        bundle = simulate(cfg)
        margin = math.hypot(cfg.agent_length, cfg.agent_width) / 2.0
        assert bundle.positions[:, :, 0].min() >= margin - 1e-9
        assert bundle.positions[:, :, 0].max() <= cfg.floor_width - margin + 1e-9
        assert bundle.positions[:, :, 1].min() >= margin - 1e-9
        assert bundle.positions[:, :, 1].max() <= cfg.floor_depth - margin + 1e-9

    def test_separation_maintained(self):
        cfg = PenConfig(n_agents=10, duration=100, seed=17)
        bundle = simulate(cfg)
        for frame in range(0, cfg.duration, 10):
            pos = bundle.positions[frame]
            diff = pos[:, None, :] - pos[None, :, :]
            dist = np.sqrt((diff ** 2).sum(axis=2))
            np.fill_diagonal(dist, np.inf)
            assert dist.min() > cfg.min_separation * 0.75

    def test_union_of_views_covers_all_agents(self):
        cfg = PenConfig(n_agents=12, duration=150, seed=19)
        bundle = simulate(cfg)
        seen = {}
        for cam, f, ident, *_ in bundle.ground_truth:
            seen.setdefault(f, set()).add(ident)
        for f in range(cfg.duration):
            assert seen.get(f, set()) == set(range(1, 13))

    def test_cross_view_overlap_dominance(self):
        # the premise the greedy matcher relies on: an agent's projected
        # ceiling box overlaps its own angled box more than anyone else's
        cfg = PenConfig(n_agents=8, duration=60, seed=23)
        bundle = simulate(cfg)
        gt = {}
        for cam, f, ident, x, y, w, h in bundle.ground_truth:
            gt.setdefault((cam, f), {})[ident] = BoundingBox(x, y, x + w, y + h)
        h_true = bundle.h_ceiling_to_angled
        for f in range(cfg.duration):
            ceiling = gt.get(("ceiling", f), {})
            angled = gt.get(("angled", f), {})
            if not ceiling or not angled:
                continue
            ids = sorted(angled)
            boxes = np.array([angled[i].as_array() for i in ids])
            for ident, cbox in ceiling.items():
                quad = project_box(h_true, cbox).as_array()
                areas = _kernels.intersection_matrix(quad[None], boxes)[0]
                if ident in angled:
                    own = areas[ids.index(ident)]
                    others = np.delete(areas, ids.index(ident))
                    assert others.size == 0 or own > others.max()
                else:
                    assert areas.max() == 0.0

    def test_correspondences_recover_true_homography(self):
        cfg = PenConfig(n_agents=1, duration=2, seed=3)
        bundle = simulate(cfg)
        assert len(bundle.correspondences) >= 12
        pairs = [
            Correspondence(PixelPoint(cx, cy), PixelPoint(ax, ay))
            for cx, cy, ax, ay in bundle.correspondences
        ]
        est = estimate_dlt(pairs)
        assert est.distance_to(bundle.h_ceiling_to_angled) < 1e-6

    def test_true_cross_homography_consistency(self):
        cfg = PenConfig()
        cams = cfg.cameras()
        h = true_cross_homography(cams["ceiling"], cams["angled"])
        for x, y in [(1.0, 5.0), (3.0, 6.5), (5.0, 7.5)]:
            c_pix = project_world(cams["ceiling"], (x, y, 0.0))
            a_pix = project_world(cams["angled"], (x, y, 0.0))
            mapped = apply(h, c_pix)
            assert np.hypot(mapped.x - a_pix[0], mapped.y - a_pix[1]) < 1e-6

    def test_merge_noise_reduces_boxes(self):
        base = simulate(PenConfig(n_agents=8, duration=30, seed=29))
        merged = simulate(
            PenConfig(n_agents=8, duration=30, seed=29, noise=NoiseConfig(merge_prob=1.0))
        )
        assert len(merged.detections["ceiling"]) < len(base.detections["ceiling"])

    def test_split_noise_doubles_boxes(self):
        base = simulate(PenConfig(n_agents=4, duration=20, seed=31))
        split = simulate(
            PenConfig(n_agents=4, duration=20, seed=31, noise=NoiseConfig(split_prob=1.0))
        )
        assert len(split.detections["ceiling"]) == 2 * len(base.detections["ceiling"])

    def test_false_positive_noise_adds_low_confidence_boxes(self):
        noisy = simulate(
            PenConfig(n_agents=2, duration=30, seed=37,
                      noise=NoiseConfig(false_positive_rate=1.0))
        )
        confidences = {row[5] for row in noisy.detections["ceiling"]}
        assert 0.5 in confidences and 1.0 in confidences

    def test_jitter_moves_boxes(self):
        base = simulate(PenConfig(n_agents=3, duration=10, seed=41))
        jittered = simulate(
            PenConfig(n_agents=3, duration=10, seed=41, noise=NoiseConfig(jitter_sigma=3.0))
        )
        assert base.detections["ceiling"] != jittered.detections["ceiling"]
        assert len(base.detections["ceiling"]) == len(jittered.detections["ceiling"])


class TestConfigValidation:
    def test_bad_fps(self):
        with pytest.raises(ConfigInvalid, match="fps"):
            PenConfig(fps=0).validate()

    def test_bad_probability(self):
        with pytest.raises(ConfigInvalid, match="dropout_prob"):
            PenConfig(noise=NoiseConfig(dropout_prob=1.5)).validate()

    def test_too_many_agents(self):
        with pytest.raises(ConfigInvalid, match="n_agents"):
            simulate(PenConfig(n_agents=500, duration=2))

    def test_separation_must_exceed_footprint(self):
        with pytest.raises(ConfigInvalid, match="min_separation"):
            PenConfig(min_separation=0.2).validate()
