"""CLEAR-MOT accuracy (MOTA) with identity switches, false positives and misses."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import PanoBox
from .geometry import circular_iou

_INFEASIBLE = 1e6


@dataclass
class FrameAnnotations:
    """Per-frame ``(id, box)`` lists over the frame range ``first..last``."""

    frames: Dict[int, List[Tuple[int, PanoBox]]] = field(default_factory=dict)
    first: Optional[int] = None
    last: Optional[int] = None

    def __post_init__(self):
        for t, items in self.frames.items():
            ids = [i for i, _ in items]
            if len(set(ids)) != len(ids):
                raise ValueError(f"frame {t}: duplicate ids")
        if self.frames:
            lo, hi = min(self.frames), max(self.frames)
            self.first = lo if self.first is None else self.first
            self.last = hi if self.last is None else self.last
            if lo < self.first or hi > self.last:
                raise ValueError("annotations fall outside the declared frame range")

    @classmethod
    def from_records(cls, records: Iterable[Tuple[int, int, PanoBox]],
                     first: Optional[int] = None, last: Optional[int] = None) -> "FrameAnnotations":
        frames: Dict[int, List[Tuple[int, PanoBox]]] = {}
        for frame, track_id, box in records:
            frames.setdefault(int(frame), []).append((int(track_id), box))
        return cls(frames, first, last)

    def get(self, frame: int) -> List[Tuple[int, PanoBox]]:
        return self.frames.get(frame, [])

    def count(self) -> int:
        return sum(len(v) for v in self.frames.values())

    def relabeled(self, mapping) -> "FrameAnnotations":
        """Copy with every id replaced by ``mapping[id]``."""
        return FrameAnnotations({t: [(mapping[i], b) for i, b in items]
                                 for t, items in self.frames.items()}, self.first, self.last)


@dataclass
class EvalResult:
    mota: float
    ids: int
    fp: int
    fn: int
    gt_count: int
    matches: int

    def as_row(self) -> Dict[str, float]:
        return {"MOTA": self.mota, "MOTA(x100)": 100.0 * self.mota, "IDS": self.ids,
                "FP": self.fp, "FN": self.fn, "GT": self.gt_count}


def evaluate(gt: FrameAnnotations, hyp: FrameAnnotations, iou_match: float = 0.5) -> EvalResult:
    """Score ``hyp`` against ``gt``.

    Per frame, a ground-truth object keeps last frame's hypothesis if that
    pair still overlaps by at least ``iou_match``; the rest are matched by
    optimal assignment on IoU.  An identity switch is counted when an object
    is matched to a different hypothesis id than at its previous match.
    MOTA is NaN when the ground truth is empty.
    """
    if hyp.frames:
        if gt.first is None or min(hyp.frames) < gt.first or max(hyp.frames) > gt.last:
            raise ValueError("hypothesis frames fall outside the ground-truth frame range")
    fp = fn = ids = matches = 0
    gt_count = gt.count()
    previous: Dict[int, int] = {}   # gt id -> hyp id, previous frame only
    last_match: Dict[int, int] = {}  # gt id -> hyp id at its latest match

    frame_range = range(gt.first, gt.last + 1) if gt.first is not None else range(0)
    for t in frame_range:
        gts = gt.get(t)
        hyps = hyp.get(t)
        hyp_pos = {h: j for j, (h, _) in enumerate(hyps)}
        pairs: Dict[int, int] = {}  # index into gts -> index into hyps
        used = set()
        for i, (g, gbox) in enumerate(gts):
            h = previous.get(g)
            j = hyp_pos.get(h) if h is not None else None
            if j is not None and j not in used and circular_iou(gbox, hyps[j][1]) >= iou_match:
                pairs[i] = j
                used.add(j)

        free_g = [i for i in range(len(gts)) if i not in pairs]
        free_h = [j for j in range(len(hyps)) if j not in used]
        if free_g and free_h:
            cost = np.full((len(free_g), len(free_h)), _INFEASIBLE)
            for a, i in enumerate(free_g):
                for b, j in enumerate(free_h):
                    iou = circular_iou(gts[i][1], hyps[j][1])
                    if iou >= iou_match:
                        cost[a, b] = 1.0 - iou
            rows, cols = linear_sum_assignment(cost)
            for a, b in zip(rows, cols):
                if cost[a, b] < _INFEASIBLE:
                    pairs[free_g[a]] = free_h[b]

        current: Dict[int, int] = {}
        for i, j in pairs.items():
            g, h = gts[i][0], hyps[j][0]
            if g in last_match and last_match[g] != h:
                ids += 1
            last_match[g] = h
            current[g] = h
        previous = current
        matches += len(pairs)
        fn += len(gts) - len(pairs)
        fp += len(hyps) - len(pairs)

    mota = 1.0 - (fn + fp + ids) / gt_count if gt_count else float("nan")
    return EvalResult(mota, ids, fp, fn, gt_count, matches)
