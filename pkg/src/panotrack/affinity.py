"""Trajectory/detection affinity: appearance, motion and 3D location cues.

The affinity of a trajectory and a detection is the weighted sum of

* appearance: cosine similarity between the detection embedding and every
  stored embedding of the trajectory, averaged with weights ``e^(k - t)``;
* motion: circular IoU of the Kalman-predicted box and the detection box;
* location: product of a time RBF and a distance RBF, summed over the
  located entries and divided by the trajectory length.

Negative appearance scores are floored at zero so the matrix stays
nonnegative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import AffinityMatrix, Detection, PanoBox, Trajectory
from .geometry import circular_iou


@dataclass(frozen=True)
class AffinityConfig:
    w_app: float = 1.0
    w_mot: float = 1.0
    w_loc: float = 1.0
    beta_t: float = 5.0  # frames
    beta_l: float = 1.0  # meters
    gate: float = 0.3

    def __post_init__(self):
        if min(self.w_app, self.w_mot, self.w_loc) < 0:
            raise ValueError("affinity weights must be nonnegative")
        if self.beta_t <= 0 or self.beta_l <= 0:
            raise ValueError("RBF bandwidths must be positive")
        if self.gate < 0:
            raise ValueError("gate threshold must be nonnegative")

    @property
    def max_affinity(self) -> float:
        return self.w_app + self.w_mot + self.w_loc


def appearance_similarity(traj: Trajectory, emb, t: int) -> float:
    """Exponentially time-weighted mean cosine similarity, in [-1, 1].

    Entries without an embedding are skipped; 0.0 if none carry one or
    ``emb`` is missing.
    """
    if not traj.entries:
        raise ValueError("trajectory has no entries")
    if traj.last_frame >= t:
        raise ValueError(f"trajectory has entries at or after frame {t}")
    if emb is None:
        return 0.0
    emb = np.asarray(emb, dtype=np.float64)
    scored = [(e.frame, float(np.dot(e.appearance, emb)))
              for e in traj.entries if e.appearance is not None]
    if not scored:
        return 0.0
    newest = max(k for k, _ in scored)
    # e^(k - t) rescaled by e^(t - newest) to stay representable
    weights = [math.exp(k - newest) for k, _ in scored]
    return sum(w * g for w, (_, g) in zip(weights, scored)) / sum(weights)


def motion_affinity(predicted: PanoBox, det: PanoBox) -> float:
    return circular_iou(predicted, det)


def location_proximity(traj: Trajectory, loc, t: int, cfg: AffinityConfig) -> float:
    if not traj.entries:
        raise ValueError("trajectory has no entries")
    if loc is None:
        return 0.0
    frames, locs = traj.located_entries()
    if len(frames) == 0:
        return 0.0
    loc = np.asarray(loc, dtype=np.float64)
    dt = t - frames
    d2 = np.sum((locs - loc) ** 2, axis=1)
    terms = np.exp(-dt * dt / (2 * cfg.beta_t ** 2)) * np.exp(-d2 / (2 * cfg.beta_l ** 2))
    return float(terms.sum() / len(traj.entries))


def _appearance_row(traj: Trajectory, embs: np.ndarray, has_emb: np.ndarray) -> np.ndarray:
    summary = traj.appearance_summary()
    out = np.zeros(len(embs))
    if summary is None or not has_emb.any():
        return out
    acc, weight = summary
    out[has_emb] = embs[has_emb] @ acc / weight
    return out


def _location_row(traj: Trajectory, locs: np.ndarray, has_loc: np.ndarray, t: int,
                  cfg: AffinityConfig) -> np.ndarray:
    out = np.zeros(len(locs))
    frames, stored = traj.located_entries()
    if len(frames) == 0 or not has_loc.any():
        return out
    dt = t - frames
    time_w = np.exp(-dt * dt / (2 * cfg.beta_t ** 2))
    d2 = np.sum((locs[has_loc, None, :] - stored[None, :, :]) ** 2, axis=2)
    out[has_loc] = np.exp(-d2 / (2 * cfg.beta_l ** 2)) @ time_w / len(traj.entries)
    return out


def affinity_matrix(trajs: Sequence[Trajectory], dets: Sequence[Detection], t: int,
                    cfg: AffinityConfig = AffinityConfig()) -> AffinityMatrix:
    """K x Q affinity against each trajectory's predicted box for frame ``t``.

    Trajectories without a prediction fall back to their last observed box.
    """
    K, Q = len(trajs), len(dets)
    values = np.zeros((K, Q))
    if K == 0 or Q == 0:
        return AffinityMatrix(values, upper=cfg.max_affinity)

    has_emb = np.array([d.embedding is not None for d in dets])
    dim = next((len(d.embedding) for d in dets if d.embedding is not None), 1)
    embs = np.stack([d.embedding if d.embedding is not None else np.zeros(dim) for d in dets])
    has_loc = np.array([d.location is not None for d in dets])
    locs = np.stack([d.location if d.location is not None else np.zeros(3) for d in dets])

    for u, traj in enumerate(trajs):
        if traj.last_frame >= t:
            raise ValueError(f"trajectory {traj.id} already has frame {t}")
        if cfg.w_app > 0:
            values[u] += cfg.w_app * np.clip(_appearance_row(traj, embs, has_emb), 0.0, 1.0)
        if cfg.w_mot > 0:
            pred = traj.predicted_box if traj.predicted_box is not None else traj.last_box
            values[u] += cfg.w_mot * np.array([motion_affinity(pred, d.box) for d in dets])
        if cfg.w_loc > 0:
            values[u] += cfg.w_loc * _location_row(traj, locs, has_loc, t, cfg)
    return AffinityMatrix(values, upper=cfg.max_affinity)
