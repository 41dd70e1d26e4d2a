"""Wiring of merge -> fusion -> tracking over a whole sequence."""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List, Optional, Sequence

from .config import RunConfig
from .core import Detection
from .fusion import Calibration, PointCloud, fuse_detections, load_calibration
from .geometry import nms_merge
from .io import TEXT_CLOUD_SUFFIXES, load_detections, load_pointcloud
from .tracker import EmittedTrack, Tracker


def merge_frame(dets: Sequence[Detection], cfg: RunConfig) -> List[Detection]:
    m = cfg["merge"]
    if m["mode"] == "off":
        return list(dets)
    return nms_merge([dets], m["iou_thresh"], m["mode"], m["sigma"], m["score_floor"])


def cloud_path(clouds_dir: Path, frame: int) -> Optional[Path]:
    for suffix in (".bin",) + TEXT_CLOUD_SUFFIXES:
        p = clouds_dir / f"{frame:06d}{suffix}"
        if p.exists():
            return p
    return None


def track_sequence(frames: Dict[int, Sequence[Detection]], cfg: RunConfig,
                   clouds: Optional[Dict[int, PointCloud]] = None,
                   calib: Optional[Calibration] = None,
                   first: Optional[int] = None, last: Optional[int] = None) -> List[EmittedTrack]:
    """Run the online pipeline frame by frame; frames without detections are empty."""
    if first is None:
        first = min(frames) if frames else 1
    if last is None:
        last = max(frames) if frames else first - 1
    tracker = Tracker(cfg["scene"]["pano_width"], cfg.tracker_config())
    band = (cfg["fusion"]["band_lo"], cfg["fusion"]["band_hi"])
    out: List[EmittedTrack] = []
    for t in range(first, last + 1):
        dets = merge_frame(frames.get(t, []), cfg)
        if cfg["fusion"]["enabled"] and clouds is not None:
            dets = fuse_detections(dets, clouds.get(t), calib, band)
        out.extend(tracker.step(t, dets))
    return out


def run_from_config(cfg: RunConfig) -> List[EmittedTrack]:
    """Load the inputs named in ``cfg['paths']`` and track them."""
    det_path = cfg.path("detections")
    if det_path is None:
        raise ValueError("paths.detections is not set")
    scene = cfg["scene"]
    frames = load_detections(det_path, scene["pano_width"], scene["embedding_dim"])

    calib = clouds = None
    calib_path, clouds_dir = cfg.path("calibration"), cfg.path("clouds")
    if cfg["fusion"]["enabled"] and calib_path is not None and clouds_dir is not None:
        calib = load_calibration(calib_path)
        if calib.pano_width != scene["pano_width"]:
            raise ValueError(f"calibration width {calib.pano_width} != scene width {scene['pano_width']}")
        clouds = {}
        for t in frames:
            p = cloud_path(clouds_dir, t)
            if p is not None:
                clouds[t] = load_pointcloud(p, t)
    return track_sequence(frames, cfg, clouds, calib)
