import numpy as np
import pytest

from panotrack.core import pano_box_columns
from panotrack.fusion import collect_points, locate
from panotrack.geometry import circular_iou
from panotrack.synthetic import ScenarioSpec, generate, orthogonal_embeddings


def small(**kw):
    base = dict(n_targets=4, n_frames=40, pano_width=1200)
    base.update(kw)
    return ScenarioSpec(**base)


class TestSpec:
    @pytest.mark.parametrize("kw", [
        dict(drop_prob=1.5), dict(occlusions=((0, 5, -1),)), dict(occlusions=((9, 5, 2),)),
        dict(box_jitter=-1.0), dict(points_per_target=3), dict(n_targets=200),
    ])
    def test_rejects_invalid(self, kw):
        with pytest.raises(ValueError):
            small(**kw)


class TestGenerate:
    def test_single_target_exact(self):
        sc = generate(ScenarioSpec(n_targets=1, n_frames=10))
        assert sum(len(v) for v in sc.detections.values()) == 10
        for t in sc.spec.frames:
            (d,) = sc.detections[t]
            ((_, g),) = sc.ground_truth.get(t)
            assert d.box == g

    def test_noise_free_boxes_equal_ground_truth(self):
        sc = generate(small(seed=5))
        for t in sc.spec.frames:
            gt = dict(sc.ground_truth.get(t))
            for d, s in zip(sc.detections[t], sc.sources[t]):
                assert d.box == gt[s]

    def test_seam_crossing(self):
        sc = generate(ScenarioSpec(seed=1))
        crossing = [b for t in sc.spec.frames for _, b in sc.ground_truth.get(t) if b.crosses_seam]
        assert crossing
        for b in crossing:
            cols = pano_box_columns(b)
            assert len(cols) == 2 and cols[0][1] == b.pano_width and cols[1][0] == 0

    def test_occlusion(self):
        sc = generate(small(occlusions=((0, 5, 8),)))
        for t in sc.spec.frames:
            hidden = 5 <= t <= 12
            assert (1 in sc.sources[t]) != hidden
            assert 1 in dict(sc.ground_truth.get(t))

    def test_deterministic(self):
        spec = small(box_jitter=2.0, embedding_noise=0.05, drop_prob=0.1, clutter_rate=0.5,
                     background_points=30, seed=9)
        a, b = generate(spec), generate(spec)
        for t in spec.frames:
            assert [d.box for d in a.detections[t]] == [d.box for d in b.detections[t]]
            assert all(np.array_equal(x.embedding, y.embedding)
                       for x, y in zip(a.detections[t], b.detections[t]))
            assert a.clouds[t].points.tobytes() == b.clouds[t].points.tobytes()

    def test_embeddings_near_orthogonal(self):
        E = orthogonal_embeddings(10, 128, np.random.default_rng(0))
        G = E @ E.T
        assert np.allclose(np.diag(G), 1.0)
        assert np.abs(G - np.eye(10)).max() < 0.2

    def test_clutter_marked(self):
        sc = generate(small(clutter_rate=2.0, seed=2))
        n_clutter = sum(s == -1 for v in sc.sources.values() for s in v)
        assert n_clutter > 0

    def test_slices_duplicate_detections(self):
        sc = generate(ScenarioSpec(n_targets=4, n_frames=40, n_slices=7, seed=4))
        assert any(len(v) > len(set(v)) for v in sc.sources.values())

    def test_cluster_recovers_location(self):
        sc = generate(ScenarioSpec(seed=2, n_frames=60))
        checked = 0
        for t in sc.spec.frames:
            items = sc.ground_truth.get(t)
            for i, box in items:
                if any(j != i and circular_iou(box, other) > 0 for j, other in items):
                    continue
                loc = locate(collect_points(box, sc.clouds[t], sc.calibration, (0, 100)))
                assert np.linalg.norm(loc - sc.locations[t][i]) < 0.1
                checked += 1
        assert checked > 200
