"""Domain types shared across the tracker.

Boxes live on a circular column axis: a 360 degree panorama of width ``W``
wraps at the seam, so a box whose right edge passes ``W`` continues at
column 0.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

EMBEDDING_DIM = 128
UNIT_NORM_TOL = 1e-6


class InvariantError(AssertionError):
    """An internal invariant was violated."""


def wrap_column(x: float, width: float) -> float:
    """Reduce ``x`` onto ``[0, width)``."""
    r = math.fmod(x, width)
    if r < 0:
        r += width
    # fmod of a tiny negative can round up to exactly width
    if r >= width:
        r = 0.0
    return r


@dataclass(frozen=True)
class PanoBox:
    """Axis-aligned box on a panorama whose columns wrap at ``pano_width``.

    ``x`` is the left edge and must lie in ``[0, pano_width)``; a box with
    ``x + w > pano_width`` crosses the seam.
    """

    x: float
    y: float
    w: float
    h: float
    pano_width: float
    score: float = 1.0
    label: int = 0

    def __post_init__(self):
        for name in ("x", "y", "w", "h", "pano_width", "score"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"PanoBox.{name} must be finite")
        if self.pano_width <= 0:
            raise ValueError("pano_width must be positive")
        if not 0 <= self.x < self.pano_width:
            raise ValueError(f"x={self.x} outside [0, {self.pano_width})")
        if not 0 < self.w <= self.pano_width:
            raise ValueError(f"w={self.w} outside (0, {self.pano_width}]")
        if self.h <= 0:
            raise ValueError(f"h={self.h} must be positive")
        if not 0 <= self.score <= 1:
            raise ValueError(f"score={self.score} outside [0, 1]")

    @classmethod
    def wrapped(cls, x, y, w, h, pano_width, score=1.0, label=0) -> "PanoBox":
        """Build a box after reducing ``x`` modulo the panorama width."""
        return cls(wrap_column(float(x), pano_width), float(y), float(w), float(h),
                   float(pano_width), float(score), int(label))

    @property
    def crosses_seam(self) -> bool:
        return self.x + self.w > self.pano_width

    @property
    def center_x(self) -> float:
        return wrap_column(self.x + self.w / 2.0, self.pano_width)

    @property
    def center_y(self) -> float:
        return self.y + self.h / 2.0

    @property
    def area(self) -> float:
        return self.w * self.h

    def shifted(self, dx: float) -> "PanoBox":
        return PanoBox.wrapped(self.x + dx, self.y, self.w, self.h,
                               self.pano_width, self.score, self.label)

    def with_score(self, score: float) -> "PanoBox":
        return PanoBox(self.x, self.y, self.w, self.h, self.pano_width, score, self.label)


def pano_box_columns(box: PanoBox) -> List[Tuple[float, float]]:
    """Half-open column intervals covered by ``box``.

    One interval when the box stays left of the seam, two when it wraps.
    """
    end = box.x + box.w
    if end <= box.pano_width:
        return [(box.x, end)]
    return [(box.x, box.pano_width), (0.0, end - box.pano_width)]


def _as_unit_vector(v, what: str) -> np.ndarray:
    arr = np.array(v, dtype=np.float64).reshape(-1)
    if arr.size == 0 or not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} must be a finite non-empty vector")
    norm = float(np.linalg.norm(arr))
    if abs(norm - 1.0) > UNIT_NORM_TOL:
        raise ValueError(f"{what} must be L2-normalized (norm={norm:.9f})")
    arr.setflags(write=False)
    return arr


def _as_point(p, what: str) -> np.ndarray:
    arr = np.array(p, dtype=np.float64).reshape(-1)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} must be a finite 3D point")
    arr.setflags(write=False)
    return arr


def normalize(v) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    return arr / np.linalg.norm(arr)


@dataclass(frozen=True, eq=False)
class Detection:
    """A box observed at one frame, with its appearance and 3D evidence."""

    box: PanoBox
    embedding: Optional[np.ndarray] = None
    location: Optional[np.ndarray] = None
    frame: int = 0

    def __post_init__(self):
        if self.embedding is not None:
            object.__setattr__(self, "embedding", _as_unit_vector(self.embedding, "embedding"))
        if self.location is not None:
            object.__setattr__(self, "location", _as_point(self.location, "location"))

    def with_location(self, location) -> "Detection":
        return Detection(self.box, self.embedding, location, self.frame)

    def with_box(self, box: PanoBox) -> "Detection":
        return Detection(box, self.embedding, self.location, self.frame)


class TrackState(enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    REMOVED = "removed"


_ALLOWED_TRANSITIONS = {
    TrackState.TENTATIVE: {TrackState.CONFIRMED, TrackState.REMOVED},
    TrackState.CONFIRMED: {TrackState.REMOVED},
    TrackState.REMOVED: set(),
}


@dataclass(frozen=True, eq=False)
class KalmanState:
    """Gaussian over (cx, cy, aspect, height) and their per-frame velocities."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64).reshape(-1)
        cov = np.array(self.covariance, dtype=np.float64)
        if mean.shape != (8,) or cov.shape != (8, 8):
            raise ValueError("KalmanState needs an 8-vector mean and 8x8 covariance")
        if not (np.all(np.isfinite(mean)) and np.all(np.isfinite(cov))):
            raise ValueError("KalmanState must be finite")
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-9):
            raise InvariantError("covariance is not symmetric")
        if np.any(np.diag(cov) <= 0):
            raise InvariantError("covariance diagonal must be strictly positive")
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)


@dataclass(frozen=True, eq=False)
class TrackEntry:
    """One (appearance, box, location) tuple of a trajectory at ``frame``."""

    frame: int
    appearance: Optional[np.ndarray]
    box: PanoBox
    location: Optional[np.ndarray]


@dataclass(eq=False)
class Trajectory:
    id: int
    entries: List[TrackEntry]
    motion: KalmanState
    state: TrackState = TrackState.TENTATIVE
    hits: int = 1
    misses: int = 0
    predicted_box: Optional[PanoBox] = None

    def __post_init__(self):
        entries, self.entries = list(self.entries), []
        # running sums keyed to the newest appearance frame, see appearance_summary
        self._app_sum = None
        self._app_weight = 0.0
        self._app_frame = None
        self._loc_frames: List[int] = []
        self._locs: List[np.ndarray] = []
        self._loc_cache = None
        for e in entries:
            self.append(e)

    def append(self, entry: TrackEntry) -> None:
        if self.entries and entry.frame <= self.entries[-1].frame:
            raise InvariantError("trajectory frames must be strictly increasing")
        self.entries.append(entry)
        if entry.appearance is not None:
            if self._app_sum is None:
                self._app_sum = np.array(entry.appearance, dtype=np.float64)
                self._app_weight = 1.0
            else:
                decay = math.exp(self._app_frame - entry.frame)
                self._app_sum = self._app_sum * decay + entry.appearance
                self._app_weight = self._app_weight * decay + 1.0
            self._app_frame = entry.frame
        if entry.location is not None:
            self._loc_frames.append(entry.frame)
            self._locs.append(entry.location)
            self._loc_cache = None

    def appearance_summary(self):
        """``(sum_k e^(k - k_last) a_k, sum_k e^(k - k_last))`` or ``None``.

        ``k_last`` is the newest frame carrying an appearance; the common
        factor cancels in any weighted mean.
        """
        if self._app_sum is None:
            return None
        return self._app_sum, self._app_weight

    def located_entries(self) -> Tuple[np.ndarray, np.ndarray]:
        """Frames and locations of the entries that carry a 3D location."""
        if self._loc_cache is None:
            frames = np.array(self._loc_frames, dtype=np.float64)
            locs = np.array(self._locs, dtype=np.float64).reshape(-1, 3)
            self._loc_cache = (frames, locs)
        return self._loc_cache

    @property
    def last_frame(self) -> int:
        return self.entries[-1].frame

    @property
    def last_box(self) -> PanoBox:
        return self.entries[-1].box

    def transition(self, new_state: TrackState) -> None:
        if new_state is self.state:
            return
        if new_state not in _ALLOWED_TRANSITIONS[self.state]:
            raise InvariantError(f"illegal transition {self.state.name} -> {new_state.name}")
        self.state = new_state


def _as_matrix(values) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("expected a 2D matrix")
    return arr


@dataclass(frozen=True, eq=False)
class AffinityMatrix:
    """Nonnegative trajectory x detection scores."""

    values: np.ndarray
    upper: float = 3.0

    def __post_init__(self):
        arr = _as_matrix(self.values)
        if not np.all(np.isfinite(arr)):
            raise ValueError("affinity entries must be finite")
        if arr.size and (arr.min() < 0 or arr.max() > self.upper + 1e-12):
            raise InvariantError(f"affinity entries must lie in [0, {self.upper}]")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True, eq=False)
class MatchingMatrix:
    """Binary assignment with at most one match per row and per column."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        raw = _as_matrix(self.values)
        if np.any((raw != 0) & (raw != 1)):
            raise InvariantError("matching matrix must be binary")
        arr = raw.astype(np.int8)
        if arr.size and (arr.sum(axis=1).max() > 1 or arr.sum(axis=0).max() > 1):
            raise InvariantError("matching matrix row/column sums must be <= 1")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def shape(self):
        return self.values.shape

    def pairs(self) -> List[Tuple[int, int]]:
        rows, cols = np.nonzero(self.values)
        return [(int(u), int(v)) for u, v in zip(rows, cols)]
