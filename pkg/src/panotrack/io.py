"""File formats.

Detections (text, one record per line, comma and/or whitespace separated)::

    frame x y w h score e_1 ... e_D

Blank lines and lines starting with ``#`` are ignored.  ``x`` must lie in
``[0, W)``; ``x + w`` may exceed ``W`` for boxes crossing the seam.  The
embedding must have exactly ``D`` values and unit L2 norm.

Point clouds: little-endian float32 ``(x, y, z)`` triples (``.bin``), or one
whitespace-separated triple per line (``.txt``, ``.xyz``).

Tracks and ground truth (MOTChallenge style)::

    frame,id,x,y,w,h,score,-1,-1,-1

Floats are written with ``repr`` so a write/read round trip is lossless.
"""

from __future__ import annotations

import re
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import numpy as np

from .core import Detection, PanoBox
from .evaluation import FrameAnnotations
from .fusion import PointCloud

_SPLIT = re.compile(r"[,\s]+")
TEXT_CLOUD_SUFFIXES = (".txt", ".xyz")


class DataFormatError(ValueError):
    """Malformed input file."""

    def __init__(self, path, message: str, line: Optional[int] = None):
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")
        self.path = str(path)
        self.line = line


def _records(path):
    with open(path, "r") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            yield lineno, [tok for tok in _SPLIT.split(line) if tok]


def _fmt(v: float) -> str:
    return repr(float(v))


def load_detections(path, pano_width: float, embedding_dim: int = 128) -> Dict[int, List[Detection]]:
    """Detections grouped by frame, in file order."""
    frames: Dict[int, List[Detection]] = {}
    for lineno, tokens in _records(path):
        if len(tokens) < 6:
            raise DataFormatError(path, f"expected at least 6 fields, got {len(tokens)}", lineno)
        if len(tokens) != 6 + embedding_dim:
            raise DataFormatError(path, f"embedding has {len(tokens) - 6} values, "
                                        f"expected {embedding_dim}", lineno)
        try:
            frame = int(tokens[0])
            x, y, w, h, score = (float(t) for t in tokens[1:6])
            emb = np.array([float(t) for t in tokens[6:]])
            det = Detection(PanoBox(x, y, w, h, pano_width, score), emb, None, frame)
        except ValueError as exc:
            raise DataFormatError(path, str(exc), lineno) from None
        frames.setdefault(frame, []).append(det)
    return frames


def save_detections(path, frames: Dict[int, List[Detection]]) -> None:
    with open(path, "w") as fh:
        for t in sorted(frames):
            for det in frames[t]:
                b = det.box
                fields = [str(t), _fmt(b.x), _fmt(b.y), _fmt(b.w), _fmt(b.h), _fmt(b.score)]
                fields += [_fmt(v) for v in det.embedding]
                fh.write(" ".join(fields) + "\n")


def load_pointcloud(path, frame: int = 0) -> PointCloud:
    path = Path(path)
    if path.suffix.lower() in TEXT_CLOUD_SUFFIXES:
        rows = []
        for lineno, tokens in _records(path):
            if len(tokens) != 3:
                raise DataFormatError(path, f"expected 3 coordinates, got {len(tokens)}", lineno)
            try:
                rows.append([float(t) for t in tokens])
            except ValueError as exc:
                raise DataFormatError(path, str(exc), lineno) from None
        pts = np.array(rows, dtype=np.float64).reshape(-1, 3)
    else:
        raw = path.read_bytes()
        if len(raw) % 12:
            raise DataFormatError(path, f"truncated point cloud: {len(raw)} bytes is not a multiple of 12")
        pts = np.frombuffer(raw, dtype="<f4").reshape(-1, 3).astype(np.float64)
    if not np.all(np.isfinite(pts)):
        raise DataFormatError(path, "non-finite coordinates")
    return PointCloud(pts, frame)


def save_pointcloud(path, cloud: PointCloud) -> None:
    Path(path).write_bytes(np.asarray(cloud.points, dtype="<f4").tobytes())


def write_tracks(path, tracks: Iterable) -> None:
    """Write ``(frame, id, box)`` records, ordered by frame then id."""
    rows = sorted(tracks, key=lambda r: (r[0], r[1]))
    with open(path, "w") as fh:
        for frame, track_id, box in rows:
            fh.write(f"{int(frame)},{int(track_id)},{_fmt(box.x)},{_fmt(box.y)},"
                     f"{_fmt(box.w)},{_fmt(box.h)},{_fmt(box.score)},-1,-1,-1\n")


def read_tracks(path, pano_width: float, first: Optional[int] = None,
                last: Optional[int] = None) -> FrameAnnotations:
    records = []
    seen = set()
    for lineno, tokens in _records(path):
        if len(tokens) < 6:
            raise DataFormatError(path, f"expected at least 6 fields, got {len(tokens)}", lineno)
        try:
            frame, track_id = int(tokens[0]), int(float(tokens[1]))
            x, y, w, h = (float(t) for t in tokens[2:6])
            score = float(tokens[6]) if len(tokens) > 6 else 1.0
            box = PanoBox(x, y, w, h, pano_width, score)
        except ValueError as exc:
            raise DataFormatError(path, str(exc), lineno) from None
        if (frame, track_id) in seen:
            raise DataFormatError(path, f"duplicate id {track_id} in frame {frame}", lineno)
        seen.add((frame, track_id))
        records.append((frame, track_id, box))
    try:
        return FrameAnnotations.from_records(records, first, last)
    except ValueError as exc:
        raise DataFormatError(path, str(exc)) from None
