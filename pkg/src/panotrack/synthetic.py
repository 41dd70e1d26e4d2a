"""Seeded synthetic panoramic scenarios with ground truth.

Targets move at constant velocity around the circular column axis.  Each
one carries a fixed unit embedding (exactly orthogonal to the others) and a
cluster of LiDAR points consistent with the scenario calibration, so fusion
recovers its 3D position.  The camera model is a single pinhole matrix whose
columns wrap modulo the panorama width; it is consistent, not realistic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np

from .core import Detection, PanoBox, wrap_column
from .evaluation import FrameAnnotations
from .fusion import Calibration, PointCloud
from .geometry import make_layout, pano_to_slices, slice_to_pano

FOCAL = 250.0


@dataclass(frozen=True)
class ScenarioSpec:
    pano_width: int = 3600
    pano_height: int = 480
    n_targets: int = 10
    n_frames: int = 300
    first_frame: int = 1
    seam_crossings: bool = True
    # (target index, first occluded frame, number of occluded frames)
    occlusions: Tuple[Tuple[int, int, int], ...] = ()
    box_jitter: float = 0.0
    embedding_noise: float = 0.0
    drop_prob: float = 0.0
    clutter_rate: float = 0.0
    embedding_dim: int = 128
    points_per_target: int = 40
    background_points: int = 0
    n_slices: int = 0
    slice_overlap: float = 0.2
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "occlusions", tuple(tuple(int(v) for v in o) for o in self.occlusions))
        if self.pano_width <= 0 or self.pano_height <= 0:
            raise ValueError("panorama size must be positive")
        if self.n_targets < 0 or self.n_frames < 0:
            raise ValueError("target and frame counts must be >= 0")
        if self.n_targets > self.embedding_dim:
            raise ValueError("need embedding_dim >= n_targets for orthogonal embeddings")
        for target, start, gap in self.occlusions:
            if not 0 <= target < self.n_targets:
                raise ValueError(f"occlusion refers to unknown target {target}")
            if gap < 0:
                raise ValueError("occlusion gap must be >= 0")
        for name in ("drop_prob",):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if min(self.box_jitter, self.embedding_noise, self.clutter_rate) < 0:
            raise ValueError("noise levels must be nonnegative")
        if self.points_per_target < 0 or self.points_per_target % 2:
            raise ValueError("points_per_target must be a nonnegative even number")

    @property
    def frames(self) -> range:
        return range(self.first_frame, self.first_frame + self.n_frames)


@dataclass
class Scenario:
    spec: ScenarioSpec
    calibration: Calibration
    detections: Dict[int, List[Detection]]
    clouds: Dict[int, PointCloud]
    ground_truth: FrameAnnotations
    # frame -> target id -> true 3D position
    locations: Dict[int, Dict[int, np.ndarray]] = field(default_factory=dict)
    # frame -> target id per detection, -1 for clutter
    sources: Dict[int, List[int]] = field(default_factory=dict)


def synthetic_calibration(width: float, height: float) -> Calibration:
    M = np.array([[FOCAL, 0.0, 0.0, 0.0],
                  [0.0, FOCAL, height / 2.0, 0.0],
                  [0.0, 0.0, 1.0, 0.0]])
    return Calibration(M, width, height)


def orthogonal_embeddings(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` mutually orthogonal unit vectors of length ``dim`` (rows)."""
    if n == 0:
        return np.zeros((0, dim))
    q, r = np.linalg.qr(rng.standard_normal((dim, n)))
    q = q * np.sign(np.diag(r))
    return np.ascontiguousarray(q.T)


def _back_project(u, v, z, height: float) -> np.ndarray:
    u, v, z = np.broadcast_arrays(np.asarray(u, float), np.asarray(v, float), np.asarray(z, float))
    return np.stack([u * z / FOCAL, (v - height / 2.0) * z / FOCAL, z], axis=-1)


def generate(spec: ScenarioSpec) -> Scenario:
    rng = np.random.default_rng(spec.seed)
    W, H = spec.pano_width, spec.pano_height
    n, T = spec.n_targets, spec.n_frames
    calib = synthetic_calibration(W, H)

    widths = rng.uniform(40, 70, n)
    heights = rng.uniform(100, 180, n)
    tops = rng.uniform(40, H - 40 - heights)
    speeds = rng.uniform(2, 8, n) * rng.choice([-1.0, 1.0], n)
    vy = rng.uniform(-0.1, 0.1, n)
    depths = rng.uniform(3, 9, n)
    centers = rng.uniform(0, W, n)
    if spec.seam_crossings:
        # every other target reaches the seam part-way through the run
        for i in range(0, n, 2):
            centers[i] = W - speeds[i] * T * rng.uniform(0.2, 0.8)
    embeddings = orthogonal_embeddings(n, spec.embedding_dim, rng)

    occluded = {}
    for target, start, gap in spec.occlusions:
        occluded.setdefault(target, set()).update(range(start, start + gap))

    layout = make_layout(W, spec.n_slices, spec.slice_overlap) if spec.n_slices > 1 else None

    detections, clouds, sources, locations = {}, {}, {}, {}
    gt_records = []
    for step, t in enumerate(spec.frames):
        dets: List[Detection] = []
        srcs: List[int] = []
        points = []
        locations[t] = {}
        for i in range(n):
            cx = centers[i] + speeds[i] * step  # unwrapped, keeps 3D motion continuous
            y = tops[i] + vy[i] * step
            w, h = widths[i], heights[i]
            true_box = PanoBox.wrapped(cx - w / 2.0, y, w, h, W)
            gt_records.append((t, i + 1, true_box))
            cy = y + h / 2.0
            locations[t][i + 1] = _back_project(cx, cy, depths[i], H)
            if t in occluded.get(i, ()):
                continue
            if spec.points_per_target:
                half = spec.points_per_target // 2
                du = rng.uniform(-0.3, 0.3, half) * w
                dv = rng.uniform(-0.3, 0.3, half) * h
                dz = rng.uniform(-0.15, 0.15, half)
                offsets = np.concatenate([np.stack([du, dv, dz], 1), -np.stack([du, dv, dz], 1)])
                points.append(_back_project(cx + offsets[:, 0], cy + offsets[:, 1],
                                            depths[i] + offsets[:, 2], H))
            if spec.drop_prob and rng.random() < spec.drop_prob:
                continue
            box = true_box
            if spec.box_jitter:
                jx, jy, jw, jh = rng.normal(0.0, spec.box_jitter, 4)
                box = PanoBox.wrapped(box.x + jx, box.y + jy, max(box.w + jw, 2.0),
                                      max(box.h + jh, 2.0), W)
            emb = embeddings[i]
            if spec.embedding_noise:
                emb = emb + rng.normal(0.0, spec.embedding_noise, spec.embedding_dim)
                emb = emb / np.linalg.norm(emb)
            dets.append(Detection(box, emb, None, t))
            srcs.append(i + 1)

        n_clutter = rng.poisson(spec.clutter_rate) if spec.clutter_rate else 0
        for _ in range(n_clutter):
            w, h = rng.uniform(30, 80), rng.uniform(60, 180)
            box = PanoBox.wrapped(rng.uniform(0, W), rng.uniform(0, H - h), w, h, W,
                                  score=rng.uniform(0.3, 0.9))
            emb = rng.standard_normal(spec.embedding_dim)
            dets.append(Detection(box, emb / np.linalg.norm(emb), None, t))
            srcs.append(-1)

        if spec.background_points:
            m = spec.background_points
            points.append(_back_project(rng.uniform(0, W, m), rng.uniform(0, H, m),
                                        rng.uniform(20, 30, m), H))

        if layout is not None:
            dets, srcs = _duplicate_over_slices(dets, srcs, layout)
        detections[t] = dets
        sources[t] = srcs
        cloud = np.concatenate(points) if points else np.zeros((0, 3))
        clouds[t] = PointCloud(cloud, t)

    gt = FrameAnnotations.from_records(gt_records, spec.first_frame, spec.first_frame + T - 1) \
        if T else FrameAnnotations()
    return Scenario(spec, calib, detections, clouds, gt, locations, sources)


def _duplicate_over_slices(dets, srcs, layout):
    """Re-emit each detection once per slice that sees it whole."""
    out, out_src = [], []
    for det, src in zip(dets, srcs):
        views = pano_to_slices(det.box, layout)
        if not views:
            out.append(det)
            out_src.append(src)
            continue
        for index, sbox in views:
            out.append(det.with_box(slice_to_pano(sbox, index, layout)))
            out_src.append(src)
    return out, out_src
