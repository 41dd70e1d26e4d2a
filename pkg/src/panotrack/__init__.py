"""Online multi-object tracking on 360 degree panoramas with LiDAR fusion."""

from .core import Detection, PanoBox, TrackState, Trajectory, pano_box_columns
from .geometry import circular_iou, make_layout, nms_merge, slice_to_pano
from .tracker import Tracker, TrackerConfig

__all__ = [
    "Detection", "PanoBox", "TrackState", "Trajectory", "pano_box_columns",
    "circular_iou", "make_layout", "nms_merge", "slice_to_pano",
    "Tracker", "TrackerConfig",
]
