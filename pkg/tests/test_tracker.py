import numpy as np
import pytest

from panotrack.core import Detection, PanoBox, TrackState
from panotrack.kalman import kalman_predict
from panotrack.synthetic import orthogonal_embeddings
from panotrack.tracker import Tracker, TrackerConfig, extend, init_tentative, run_tracker

W = 1000
EMB = orthogonal_embeddings(4, 16, np.random.default_rng(0))


def det(x, frame, k=0, y=100.0, loc=None):
    return Detection(PanoBox.wrapped(x, y, 40, 120, W), EMB[k], loc, frame)


class TestInit:
    def test_tentative(self):
        tr = init_tentative(det(10, 1), 7)
        assert len(tr.entries) == 1 and tr.state is TrackState.TENTATIVE and tr.id == 7

    def test_no_location(self):
        assert init_tentative(det(10, 1), 1).entries[0].location is None

    def test_zero_velocity_prediction(self):
        d = det(990, 1)
        tr = init_tentative(d, 1)
        _, pred = kalman_predict(tr.motion, W)
        assert pred.center_x == pytest.approx(d.box.center_x)
        assert pred.center_y == pytest.approx(d.box.center_y)


class TestExtend:
    def test_grows(self):
        tr = extend(init_tentative(det(10, 1), 1), det(12, 2))
        assert len(tr.entries) == 2

    def test_history_untouched(self):
        tr = init_tentative(det(10, 1), 1)
        first = tr.entries[0]
        extend(tr, det(12, 2))
        assert tr.entries[0] is first and first.box == det(10, 1).box

    def test_fifty_extensions(self):
        tr = init_tentative(det(0, 1), 1)
        for f in range(2, 52):
            extend(tr, det(f * 3.0, f))
        frames = [e.frame for e in tr.entries]
        assert frames == list(range(1, 52))
        assert all(a < b for a, b in zip(frames, frames[1:]))

    def test_rejects_old_frame(self):
        tr = init_tentative(det(0, 5), 1)
        with pytest.raises(ValueError):
            extend(tr, det(0, 5))


class TestLifecycle:
    def test_cold_start(self):
        trk = Tracker(W)
        out = trk.step(1, [det(10, 1, 0), det(500, 1, 1)])
        assert out == []
        assert [t.state for t in trk.trajectories] == [TrackState.TENTATIVE] * 2

    def test_confirmed_after_three_hits(self):
        trk = Tracker(W)
        emitted = [trk.step(f, [det(10 + 2 * f, f)]) for f in range(1, 5)]
        assert [len(e) for e in emitted] == [0, 0, 1, 1]
        assert emitted[2][0].id == 1 and emitted[2][0].box == det(16, 3).box

    def test_tentative_dropped_on_first_miss(self):
        trk = Tracker(W)
        trk.step(1, [det(10, 1)])
        trk.step(2, [])
        assert trk.trajectories == []

    def test_confirmed_removed_after_window(self):
        cfg = TrackerConfig()
        trk = Tracker(W, cfg)
        for f in range(1, 4):
            trk.step(f, [det(10, f)])
        for f in range(4, 4 + cfg.max_misses):
            trk.step(f, [])
        assert len(trk.trajectories) == 1 and trk.trajectories[0].misses == cfg.max_misses
        trk.step(4 + cfg.max_misses, [])
        assert trk.trajectories == []

    def test_ids_not_reused(self):
        trk = Tracker(W)
        trk.step(1, [det(10, 1)])
        trk.step(2, [])
        trk.step(3, [det(10, 3)])
        assert [t.id for t in trk.trajectories] == [2]

    def test_frames_must_be_consecutive(self):
        trk = Tracker(W)
        trk.step(1, [])
        with pytest.raises(ValueError):
            trk.step(3, [])

    def test_swapping_targets_keep_ids(self):
        frames = {}
        for f in range(1, 21):
            # same row, opposite directions, boxes fully overlap around frame 10
            frames[f] = [det(400 + 5 * f, f, 0), det(500 - 5 * f, f, 1)]
        out = run_tracker(frames, W)
        by_id = {}
        for e in out:
            by_id.setdefault(e.id, []).append(e.box.x)
        assert sorted(by_id) == [1, 2]
        assert by_id[1] == [400 + 5 * f for f in range(3, 21)]
        assert by_id[2] == [500 - 5 * f for f in range(3, 21)]

    def test_crossing_seam(self):
        frames = {f: [det((980 + 4 * f) % W, f, 2)] for f in range(1, 30)}
        out = run_tracker(frames, W)
        assert {e.id for e in out} == {1} and len(out) == 27

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        frames = {f: [det(float(rng.uniform(0, W)), f, int(rng.integers(0, 4)))
                      for _ in range(int(rng.integers(0, 4)))] for f in range(1, 40)}
        assert run_tracker(frames, W) == run_tracker(frames, W)

    def test_emitted_ids_distinct_and_never_tentative(self):
        rng = np.random.default_rng(11)
        trk = Tracker(W)
        for f in range(1, 60):
            dets = [det(float(x), f, k) for k, x in enumerate(rng.uniform(0, W, 3))]
            out = trk.step(f, dets)
            ids = [e.id for e in out]
            assert len(ids) == len(set(ids))
            states = {t.id: t.state for t in trk.trajectories}
            assert all(states[i] is TrackState.CONFIRMED for i in ids)
