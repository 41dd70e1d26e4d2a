"""Panorama split/merge geometry.

A panorama is cut into ``N`` overlapping slices along its width so that a
detector sees narrow images; detections found in the slices are mapped back
into panorama columns and merged with NMS.  The last slice wraps across the
seam so every column, including the seam, falls inside at least one slice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, NamedTuple, Sequence, Tuple

import numpy as np

from .core import Detection, PanoBox, wrap_column


@dataclass(frozen=True)
class SliceLayout:
    pano_width: int
    n_slices: int
    overlap: float
    slice_width: int
    offsets: Tuple[int, ...]

    def slice_columns(self, index: int) -> List[Tuple[int, int]]:
        """Half-open panorama column intervals covered by slice ``index``."""
        start = self.offsets[index]
        end = start + self.slice_width
        if end <= self.pano_width:
            return [(start, end)]
        return [(start, self.pano_width), (0, end - self.pano_width)]


class SliceBox(NamedTuple):
    """A box in the pixel frame of one slice."""

    x: float
    y: float
    w: float
    h: float
    score: float = 1.0


def make_layout(pano_width: int, n_slices: int, overlap: float) -> SliceLayout:
    """Evenly spaced slices of width ``ceil(W / (N * (1 - o)))``.

    Slice ``i`` starts at ``floor(i * W / N)``.  A single slice is the whole
    panorama regardless of ``overlap``.
    """
    if pano_width <= 0 or int(pano_width) != pano_width:
        raise ValueError("pano_width must be a positive integer")
    if n_slices < 1:
        raise ValueError("n_slices must be >= 1")
    if not 0 <= overlap < 1:
        raise ValueError("overlap must lie in [0, 1)")
    if overlap > 0.9:
        raise ValueError("overlap must not exceed 0.9")
    pano_width = int(pano_width)
    if n_slices == 1:
        return SliceLayout(pano_width, 1, overlap, pano_width, (0,))
    slice_width = math.ceil(pano_width / (n_slices * (1.0 - overlap)) - 1e-9)
    if slice_width > pano_width:
        raise ValueError(f"{n_slices} slices with overlap {overlap} are wider than the panorama")
    offsets = tuple((i * pano_width) // n_slices for i in range(n_slices))
    return SliceLayout(pano_width, n_slices, overlap, slice_width, offsets)


def slice_to_pano(box: SliceBox, slice_index: int, layout: SliceLayout) -> PanoBox:
    if not 0 <= slice_index < layout.n_slices:
        raise ValueError(f"slice index {slice_index} out of range for {layout.n_slices} slices")
    box = SliceBox(*box)
    if box.x < 0 or box.x + box.w > layout.slice_width + 1e-9:
        raise ValueError("box does not lie inside the slice")
    return PanoBox.wrapped(box.x + layout.offsets[slice_index], box.y, box.w, box.h,
                           layout.pano_width, box.score)


def pano_to_slices(box: PanoBox, layout: SliceLayout) -> List[Tuple[int, SliceBox]]:
    """Every slice that contains ``box`` whole, with the box in slice pixels."""
    if box.pano_width != layout.pano_width:
        raise ValueError("box and layout disagree on panorama width")
    out = []
    for i, start in enumerate(layout.offsets):
        rel = wrap_column(box.x - start, layout.pano_width)
        if rel + box.w <= layout.slice_width:
            out.append((i, SliceBox(rel, box.y, box.w, box.h, box.score)))
    return out


def circular_overlap(xa: float, wa: float, xb: float, wb: float, width: float) -> float:
    """Length of the intersection of two arcs on a circle of circumference ``width``."""
    # work relative to a's left edge so the result only depends on the offset
    d = wrap_column(xb - xa, width)
    inside = max(0.0, min(wa, d + wb) - d)
    wrapped = max(0.0, min(wa, d + wb - width))
    return inside + wrapped


def circular_iou(a: PanoBox, b: PanoBox) -> float:
    if a.pano_width != b.pano_width:
        raise ValueError(f"panorama widths differ: {a.pano_width} vs {b.pano_width}")
    dy = min(a.y + a.h, b.y + b.h) - max(a.y, b.y)
    if dy <= 0:
        return 0.0
    dx = circular_overlap(a.x, a.w, b.x, b.w, a.pano_width)
    if dx <= 0:
        return 0.0
    inter = dx * dy
    union = a.w * a.h + b.w * b.h - inter
    return min(1.0, max(0.0, inter / union))


def _box_of(item):
    return item.box if isinstance(item, Detection) else item


def _with_score(item, score):
    if isinstance(item, Detection):
        return item.with_box(item.box.with_score(score))
    return item.with_score(score)


def nms_merge(per_slice_dets: Iterable[Sequence], iou_thresh: float = 0.5,
              mode: str = "hard", sigma: float = 0.5, score_floor: float = 0.05) -> list:
    """Merge per-slice detections (already in panorama columns).

    Items may be ``Detection`` or bare ``PanoBox`` objects.  ``hard`` keeps the
    best box and drops every box overlapping it by more than ``iou_thresh``;
    ``soft`` multiplies overlapping scores by ``exp(-iou**2 / sigma)`` and
    drops boxes that fall below ``score_floor``.  The result is ordered by
    descending score; ties keep input order.
    """
    if mode not in ("hard", "soft"):
        raise ValueError(f"unknown NMS mode {mode!r}")
    items = [d for group in per_slice_dets for d in group]
    if not items:
        return []
    boxes = [_box_of(d) for d in items]
    scores = np.array([b.score for b in boxes], dtype=np.float64)

    if mode == "hard":
        order = sorted(range(len(items)), key=lambda i: -scores[i])
        keep = []
        suppressed = np.zeros(len(items), dtype=bool)
        for pos, i in enumerate(order):
            if suppressed[i]:
                continue
            keep.append(items[i])
            for j in order[pos + 1:]:
                if not suppressed[j] and circular_iou(boxes[i], boxes[j]) > iou_thresh:
                    suppressed[j] = True
        return keep

    remaining = [i for i in range(len(items)) if scores[i] >= score_floor]
    current = scores.copy()
    kept: List[Tuple[int, float]] = []
    while remaining:
        best = max(remaining, key=lambda i: (current[i], -i))
        remaining.remove(best)
        kept.append((best, float(current[best])))
        survivors = []
        for j in remaining:
            iou = circular_iou(boxes[best], boxes[j])
            current[j] *= math.exp(-(iou * iou) / sigma)
            if current[j] >= score_floor:
                survivors.append(j)
        remaining = survivors
    kept.sort(key=lambda t: (-t[1], t[0]))
    return [_with_score(items[i], s) for i, s in kept]
