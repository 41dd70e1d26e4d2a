import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from panotrack.core import PanoBox, pano_box_columns
from panotrack.geometry import (
    SliceBox, circular_iou, make_layout, nms_merge, pano_to_slices, slice_to_pano,
)


def raster_iou(a: PanoBox, b: PanoBox) -> float:
    """Pixel-counting IoU for integer boxes; columns taken mod W."""
    W = int(a.pano_width)
    rows = int(max(a.y + a.h, b.y + b.h)) + 1

    def mask(box):
        m = np.zeros((rows, W), dtype=bool)
        cols = (np.arange(int(box.x), int(box.x + box.w))) % W
        m[int(box.y):int(box.y + box.h)][:, cols] = True
        return m

    ma, mb = mask(a), mask(b)
    return (ma & mb).sum() / (ma | mb).sum()


int_box = st.builds(
    lambda x, y, w, h: PanoBox(x, y, w, h, 64),
    st.integers(0, 63), st.integers(0, 8), st.integers(1, 64), st.integers(1, 8),
)


class TestLayout:
    def test_single_slice_is_whole_image(self):
        lay = make_layout(1000, 1, 0.2)
        assert lay.offsets == (0,) and lay.slice_columns(0) == [(0, 1000)]

    def test_two_slices(self):
        lay = make_layout(1000, 2, 0.2)
        assert lay.slice_width == 625 and lay.offsets == (0, 500)
        assert lay.slice_columns(1) == [(500, 1000), (0, 125)]

    def test_seven_slices(self):
        lay = make_layout(3500, 7, 0.2)
        assert lay.slice_width == 625
        assert lay.offsets == tuple(range(0, 3001, 500))

    @given(st.integers(10, 5000), st.integers(2, 12), st.floats(0, 0.5))
    def test_every_column_covered(self, W, N, o):
        try:
            lay = make_layout(W, N, o)
        except ValueError:
            return
        covered = np.zeros(W, dtype=bool)
        for i in range(N):
            for a, b in lay.slice_columns(i):
                covered[a:b] = True
        assert covered.all()

    def test_rejects_bad_arguments(self):
        for args in [(0, 2, 0.2), (100, 0, 0.2), (100, 2, 1.0), (100, 2, -0.1)]:
            with pytest.raises(ValueError):
                make_layout(*args)


class TestSliceToPano:
    lay = make_layout(1000, 2, 0.2)

    def test_zero_offset(self):
        assert slice_to_pano(SliceBox(10, 0, 5, 5), 0, self.lay).x == 10

    def test_translation(self):
        assert slice_to_pano(SliceBox(10, 0, 5, 5), 1, self.lay).x == 510

    def test_wraps_past_seam(self):
        b = slice_to_pano(SliceBox(550, 0, 30, 5), 1, self.lay)
        assert b.x == 50 and b.w == 30

    def test_straddles_seam(self):
        b = slice_to_pano(SliceBox(480, 0, 40, 5), 1, self.lay)
        assert b.x == 980 and pano_box_columns(b) == [(980, 1000), (0, 20)]

    def test_rejects_out_of_slice(self):
        with pytest.raises(ValueError):
            slice_to_pano(SliceBox(620, 0, 10, 5), 0, self.lay)
        with pytest.raises(ValueError):
            slice_to_pano(SliceBox(0, 0, 10, 5), 2, self.lay)


class TestCircularIoU:
    def test_identical(self):
        a = PanoBox(3, 4, 10, 10, 700)
        assert circular_iou(a, a) == 1.0

    def test_disjoint(self):
        assert circular_iou(PanoBox(0, 0, 10, 10, 700), PanoBox(100, 0, 10, 10, 700)) == 0.0

    def test_across_seam(self):
        a, b = PanoBox(695, 0, 10, 10, 700), PanoBox(0, 0, 5, 10, 700)
        assert circular_iou(a, b) == 0.5

    def test_width_mismatch(self):
        with pytest.raises(ValueError):
            circular_iou(PanoBox(0, 0, 1, 1, 10), PanoBox(0, 0, 1, 1, 11))

    @settings(max_examples=300)
    @given(int_box, int_box)
    def test_matches_raster_oracle(self, a, b):
        assert circular_iou(a, b) == pytest.approx(raster_iou(a, b), abs=1e-12)

    @given(int_box, int_box, st.integers(0, 63))
    def test_symmetric_bounded_shift_invariant(self, a, b, d):
        iou = circular_iou(a, b)
        assert iou == circular_iou(b, a)
        assert 0.0 <= iou <= 1.0
        assert circular_iou(a.shifted(d), b.shifted(d)) == iou


class TestNMS:
    def test_duplicates(self):
        a = PanoBox(0, 0, 10, 10, 100, 0.9)
        out = nms_merge([[a], [a.with_score(0.8)]])
        assert len(out) == 1 and out[0].score == 0.9

    def test_disjoint_kept(self):
        out = nms_merge([[PanoBox(0, 0, 10, 10, 100, 0.9), PanoBox(50, 0, 10, 10, 100, 0.8)]])
        assert len(out) == 2

    def test_chain_keeps_first_and_third(self):
        # IoUs 1-2 and 2-3 are 0.6, IoU 1-3 is 0.2 (the smallest value the other two allow)
        b1 = PanoBox(0, 0, 30, 10, 100, 0.9)
        b2 = PanoBox(0, 0, 50, 10, 100, 0.8)
        b3 = PanoBox(20, 0, 30, 10, 100, 0.7)
        assert [raster_iou(b1, b2), raster_iou(b2, b3), raster_iou(b1, b3)] == \
            pytest.approx([0.6, 0.6, 0.2])
        assert nms_merge([[b1, b2, b3]], 0.5) == [b1, b3]

    def test_chain_across_seam(self):
        boxes = [PanoBox(90, 0, 30, 10, 100, 0.9), PanoBox(90, 0, 50, 10, 100, 0.8),
                 PanoBox(10, 0, 30, 10, 100, 0.7)]
        assert nms_merge([boxes], 0.5) == [boxes[0], boxes[2]]

    def test_soft_decays_overlaps(self):
        a = PanoBox(0, 0, 10, 10, 100, 0.9)
        b = PanoBox(0, 0, 10, 10, 100, 0.8)
        out = nms_merge([[a, b]], mode="soft", sigma=0.5)
        assert out[0] == a
        assert out[1].score == pytest.approx(0.8 * np.exp(-2.0))

    def test_soft_floor(self):
        a = PanoBox(0, 0, 10, 10, 100, 0.9)
        b = PanoBox(0, 0, 10, 10, 100, 0.3)
        assert nms_merge([[a, b]], mode="soft", sigma=0.5, score_floor=0.05) == [a]

    @given(st.lists(st.tuples(int_box, st.floats(0.01, 1.0)), max_size=12),
           st.floats(0.1, 0.9))
    def test_hard_output_pairwise_below_threshold(self, items, thr):
        boxes = [b.with_score(s) for b, s in items]
        out = nms_merge([boxes], thr)
        assert len(out) <= len(boxes)
        for i in range(len(out)):
            for j in range(i + 1, len(out)):
                assert circular_iou(out[i], out[j]) <= thr

    @given(st.lists(st.tuples(int_box, st.floats(0.01, 1.0)), max_size=10))
    def test_soft_count_not_larger(self, items):
        boxes = [b.with_score(s) for b, s in items]
        assert len(nms_merge([boxes], mode="soft")) <= len(boxes)


def round_trip(box: PanoBox, layout):
    per_slice = [[slice_to_pano(sb, i, layout)] for i, sb in pano_to_slices(box, layout)]
    return nms_merge(per_slice, 0.5)


@pytest.mark.parametrize("x", [0, 1, 100, 499.5, 3000, 3490, 3495, 3499.5])
def test_round_trip_single_box(x):
    lay = make_layout(3500, 7, 0.2)
    box = PanoBox(x, 40, 60, 120, 3500, 0.9)
    assert pano_to_slices(box, lay)
    out = round_trip(box, lay)
    assert len(out) == 1
    got = out[0]
    assert abs(((got.x - box.x + 1750) % 3500) - 1750) <= 1
    assert abs(got.w - box.w) <= 1 and abs(got.y - box.y) <= 1 and abs(got.h - box.h) <= 1
