"""Trajectory overlay figure."""

from __future__ import annotations

from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluation import FrameAnnotations  # noqa: E402


def _split_at_seam(xs, ys, width):
    """Break a polyline wherever consecutive columns jump across the seam."""
    xs, ys = np.asarray(xs), np.asarray(ys)
    cuts = np.flatnonzero(np.abs(np.diff(xs)) > width / 2) + 1
    return zip(np.split(xs, cuts), np.split(ys, cuts))


def plot_tracks(tracks: FrameAnnotations, width: float, height: float, path) -> None:
    """Box-center paths on the panorama canvas (top) and column vs frame (bottom)."""
    paths = defaultdict(list)
    for t in sorted(tracks.frames):
        for track_id, box in tracks.frames[t]:
            paths[track_id].append((t, box.center_x, box.center_y))

    fig, (ax_img, ax_time) = plt.subplots(2, 1, figsize=(14, 7),
                                          gridspec_kw={"height_ratios": [1, 1.3]})
    cmap = plt.get_cmap("tab20")
    for n, (track_id, pts) in enumerate(sorted(paths.items())):
        frames, cx, cy = (np.array(v) for v in zip(*pts))
        color = cmap(n % 20)
        for sx, sy in _split_at_seam(cx, cy, width):
            ax_img.plot(sx, sy, "-", color=color, lw=1.2)
        for sx, sf in _split_at_seam(cx, frames, width):
            ax_time.plot(sx, sf, "-", color=color, lw=1.2)
        ax_img.annotate(str(track_id), (cx[0], cy[0]), fontsize=7, color=color)

    ax_img.set_xlim(0, width)
    ax_img.set_ylim(height, 0)
    ax_img.set_title("trajectories on the panorama")
    ax_time.set_xlim(0, width)
    ax_time.set_xlabel("column")
    ax_time.set_ylabel("frame")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)
