"""LiDAR/camera fusion: attach a 3D location to every 2D detection.

Points are projected with a 3x4 matrix; those landing inside a detection box
are kept, trimmed to a range percentile band (a cheap stand-in for
foreground segmentation) and averaged.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .core import Detection, PanoBox

DEPTH_EPS = 1e-6
DEFAULT_BAND = (10.0, 80.0)


@dataclass(frozen=True, eq=False)
class Calibration:
    """Projection from sensor coordinates (meters) to panorama pixels.

    ``wrap_columns`` reduces projected columns modulo the panorama width,
    matching the circular column axis of the boxes.  With it off, columns
    outside ``[0, W)`` are out of view.
    """

    matrix: np.ndarray
    pano_width: float
    pano_height: float
    wrap_columns: bool = True

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.float64)
        if m.shape != (3, 4) or not np.all(np.isfinite(m)):
            raise ValueError("projection matrix must be a finite 3x4 matrix")
        if abs(np.linalg.det(m[:, :3])) < 1e-12:
            raise ValueError("left 3x3 block of the projection matrix is singular")
        if self.pano_width <= 0 or self.pano_height <= 0:
            raise ValueError("panorama size must be positive")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def shifted(self, dx: float) -> "Calibration":
        """Calibration whose columns are offset by ``dx`` pixels."""
        shift = np.array([[1.0, 0.0, dx], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
        return Calibration(shift @ self.matrix, self.pano_width, self.pano_height,
                           self.wrap_columns)


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    frame: int = 0

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ValueError("point cloud contains non-finite coordinates")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)


def load_calibration(path) -> Calibration:
    """Read 12 row-major matrix entries followed by W and H."""
    tokens = Path(path).read_text().split()
    if len(tokens) != 14:
        raise ValueError(f"{path}: expected 14 numbers, found {len(tokens)}")
    values = [float(t) for t in tokens]
    return Calibration(np.array(values[:12]).reshape(3, 4), values[12], values[13])


def save_calibration(path, calib: Calibration) -> None:
    rows = [" ".join(repr(float(v)) for v in row) for row in calib.matrix]
    rows.append(f"{float(calib.pano_width)!r} {float(calib.pano_height)!r}")
    Path(path).write_text("\n".join(rows) + "\n")


def _project_many(points: np.ndarray, calib: Calibration):
    """Pixel coordinates and a visibility mask for an (n, 3) array."""
    m = calib.matrix
    hom = points @ m[:, :3].T + m[:, 3]
    depth = hom[:, 2]
    visible = depth > DEPTH_EPS
    safe = np.where(visible, depth, 1.0)
    u = hom[:, 0] / safe
    v = hom[:, 1] / safe
    if calib.wrap_columns:
        u = np.mod(u, calib.pano_width)
        u = np.where(u >= calib.pano_width, 0.0, u)
    else:
        visible &= (u >= 0) & (u < calib.pano_width)
    visible &= (v >= 0) & (v < calib.pano_height)
    return u, v, visible


def project_point(point, calib: Calibration) -> Optional[Tuple[float, float]]:
    """Pixel ``(u, v)`` of a 3D point, or ``None`` if it is out of view."""
    p = np.asarray(point, dtype=np.float64).reshape(1, 3)
    u, v, visible = _project_many(p, calib)
    if not visible[0]:
        return None
    return float(u[0]), float(v[0])


def _inside_columns(u: np.ndarray, box: PanoBox) -> np.ndarray:
    end = box.x + box.w
    mask = (u >= box.x) & (u < min(end, box.pano_width))
    if end > box.pano_width:
        mask |= u < end - box.pano_width
    return mask


def _frustum_cull(points: np.ndarray, box: PanoBox, calib: Calibration) -> np.ndarray:
    # near plane plus the top/bottom planes of the box; the column planes are
    # skipped because wrapped columns do not bound a convex region
    m = calib.matrix
    depth = points @ m[2, :3] + m[2, 3]
    row = points @ m[1, :3] + m[1, 3]
    top = max(box.y, 0.0)
    return (depth > DEPTH_EPS) & (row >= top * depth) & (row < (box.y + box.h) * depth)


def points_in_box(box: PanoBox, cloud: PointCloud, calib: Calibration,
                  precull: bool = True) -> np.ndarray:
    """Cloud points whose projection lands inside ``box``."""
    pts = cloud.points
    if len(pts) == 0:
        return pts
    if precull:
        pts = pts[_frustum_cull(pts, box, calib)]
    u, v, visible = _project_many(pts, calib)
    mask = visible & _inside_columns(u, box) & (v >= box.y) & (v < box.y + box.h)
    return pts[mask]


def collect_points(box: PanoBox, cloud: PointCloud, calib: Calibration,
                   depth_band: Sequence[float] = DEFAULT_BAND, precull: bool = True) -> np.ndarray:
    """In-box points whose range lies within the given percentile band."""
    lo, hi = depth_band
    if not 0 <= lo < hi <= 100:
        raise ValueError(f"invalid percentile band {depth_band}")
    pts = points_in_box(box, cloud, calib, precull=precull)
    if len(pts) == 0 or (lo == 0 and hi == 100):
        return pts
    ranges = np.linalg.norm(pts, axis=1)
    r_lo, r_hi = np.percentile(ranges, [lo, hi])
    return pts[(ranges >= r_lo) & (ranges <= r_hi)]


def locate(points) -> Optional[np.ndarray]:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) == 0:
        return None
    return pts.mean(axis=0)


def fuse_detections(detections: Iterable[Detection], cloud: Optional[PointCloud],
                    calib: Optional[Calibration],
                    depth_band: Sequence[float] = DEFAULT_BAND) -> List[Detection]:
    """Return the detections with their 3D location filled in where possible."""
    detections = list(detections)
    if cloud is None or calib is None:
        return detections
    out = []
    for det in detections:
        loc = locate(collect_points(det.box, cloud, calib, depth_band))
        out.append(det.with_location(loc))
    return out
