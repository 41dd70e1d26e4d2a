import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from panotrack.core import Detection, PanoBox
from panotrack.fusion import (
    Calibration, PointCloud, collect_points, fuse_detections, load_calibration, locate,
    points_in_box, project_point, save_calibration,
)
from panotrack.synthetic import synthetic_calibration

CANON = Calibration(np.hstack([np.eye(3), np.zeros((3, 1))]), 10, 10)


def interp_percentile(values, q):
    """Linear-interpolation percentile by hand: position q/100 * (n - 1)."""
    s = sorted(values)
    pos = q / 100 * (len(s) - 1)
    lo = int(np.floor(pos))
    hi = min(lo + 1, len(s) - 1)
    return s[lo] + (pos - lo) * (s[hi] - s[lo])


class TestProjection:
    def test_principal_ray(self):
        assert project_point([0, 0, 1], CANON) == (0.0, 0.0)

    def test_perspective_divide(self):
        assert project_point([2, 1, 2], CANON) == (1.0, 0.5)

    def test_behind_camera(self):
        assert project_point([0, 0, -1], CANON) is None
        assert project_point([0, 0, 0], CANON) is None

    @settings(max_examples=200)
    @given(arrays(np.float64, (3, 4), elements=st.floats(-5, 5)),
           arrays(np.float64, 3, elements=st.floats(-50, 50)))
    def test_agrees_with_matrix_arithmetic(self, M, p):
        if abs(np.linalg.det(M[:, :3])) < 1e-3:
            return
        calib = Calibration(M, 1e12, 1e12, wrap_columns=False)
        h = M @ np.append(p, 1.0)
        got = project_point(p, calib)
        if h[2] <= 1e-6 or not (0 <= h[0] / h[2] < 1e12 and 0 <= h[1] / h[2] < 1e12):
            assert got is None
        else:
            assert got == pytest.approx((h[0] / h[2], h[1] / h[2]), rel=1e-9, abs=1e-9)

    def test_singular_matrix_rejected(self):
        with pytest.raises(ValueError):
            Calibration(np.zeros((3, 4)), 10, 10)

    def test_calibration_round_trip(self, tmp_path):
        calib = synthetic_calibration(3600, 480)
        save_calibration(tmp_path / "c.txt", calib)
        back = load_calibration(tmp_path / "c.txt")
        assert np.array_equal(back.matrix, calib.matrix)
        assert (back.pano_width, back.pano_height) == (3600, 480)


def ray_points(ranges, direction=(0.5, 0.5, 1.0)):
    d = np.asarray(direction) / np.linalg.norm(direction)
    return np.outer(ranges, d)


class TestCollect:
    box = PanoBox(0, 0, 1, 1, 10)

    def test_single_point(self):
        cloud = PointCloud(ray_points([3.0]))
        assert np.allclose(collect_points(self.box, cloud, CANON, (0, 100)), ray_points([3.0]))

    def test_no_point_inside(self):
        cloud = PointCloud([[5.0, 5.0, 1.0]])
        assert len(collect_points(self.box, cloud, CANON, (0, 100))) == 0

    def test_percentile_band(self):
        ranges = np.arange(1.0, 11.0)
        lo, hi = interp_percentile(ranges, 25), interp_percentile(ranges, 75)
        assert (lo, hi) == (3.25, 7.75)
        cloud = PointCloud(ray_points(ranges))
        kept = np.linalg.norm(collect_points(self.box, cloud, CANON, (25, 75)), axis=1)
        assert np.allclose(sorted(kept), [4, 5, 6, 7])

    def test_wrapped_box(self):
        calib = synthetic_calibration(3600, 480)
        box = PanoBox(3590, 200, 20, 80, 3600)
        # one point projecting to column 3595, one to column 5
        pts = np.array([[-5 / 250 * 4, 0.0, 4.0], [5 / 250 * 4, 0.0, 4.0]])
        got = points_in_box(box, PointCloud(pts), calib)
        assert len(got) == 2

    def test_invalid_band(self):
        with pytest.raises(ValueError):
            collect_points(self.box, PointCloud(np.zeros((0, 3))), CANON, (80, 10))

    @settings(max_examples=150)
    @given(arrays(np.float64, (40, 3), elements=st.floats(-20, 20)),
           st.floats(0, 3599), st.floats(0, 470), st.floats(1, 3600), st.floats(1, 480))
    def test_precull_changes_nothing(self, pts, x, y, w, h):
        calib = synthetic_calibration(3600, 480)
        box = PanoBox(x, y, w, h, 3600)
        cloud = PointCloud(pts)
        fast = collect_points(box, cloud, calib, (0, 100), precull=True)
        slow = collect_points(box, cloud, calib, (0, 100), precull=False)
        assert np.array_equal(fast, slow)
        # subset of the input cloud
        for p in fast:
            assert (np.all(pts == p, axis=1)).any()


class TestLocate:
    def test_mean(self):
        assert np.array_equal(locate([[1, 1, 1], [3, 3, 3]]), [2, 2, 2])

    def test_singleton(self):
        assert np.array_equal(locate([[5, 0, 2]]), [5, 0, 2])

    def test_empty(self):
        assert locate(np.zeros((0, 3))) is None

    @given(arrays(np.float64, (7, 3), elements=st.floats(-100, 100)),
           arrays(np.float64, 3, elements=st.floats(-100, 100)))
    def test_translation_equivariant(self, P, v):
        assert np.allclose(locate(P + v), locate(P) + v, atol=1e-9)


def test_fuse_detections_sets_location():
    det = Detection(PanoBox(0, 0, 1, 1, 10), frame=0)
    cloud = PointCloud(ray_points([2.0, 4.0]))
    (out,) = fuse_detections([det], cloud, CANON, (0, 100))
    assert np.allclose(out.location, ray_points([3.0])[0])
    (none,) = fuse_detections([det.with_box(PanoBox(5, 5, 1, 1, 10))], cloud, CANON, (0, 100))
    assert none.location is None
    assert fuse_detections([det], None, CANON) == [det]
