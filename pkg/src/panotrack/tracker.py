"""Online tracking loop and trajectory lifecycle."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Sequence

from .affinity import AffinityConfig, affinity_matrix
from .association import gate, solve_matching
from .core import Detection, InvariantError, PanoBox, TrackEntry, Trajectory, TrackState
from .kalman import DEFAULT_FILTER, ConstantVelocityFilter

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrackerConfig:
    confirm_hits: int = 3
    max_misses: int = 30
    tentative_grace: int = 0
    objective: str = "l2"
    affinity: AffinityConfig = field(default_factory=AffinityConfig)

    def __post_init__(self):
        if self.confirm_hits < 1:
            raise ValueError("confirm_hits must be >= 1")
        if self.max_misses < 0 or self.tentative_grace < 0:
            raise ValueError("miss windows must be >= 0")
        if self.objective not in ("l2", "linear"):
            raise ValueError(f"unknown objective {self.objective!r}")


class EmittedTrack(NamedTuple):
    frame: int
    id: int
    box: PanoBox


def _entry(det: Detection) -> TrackEntry:
    return TrackEntry(det.frame, det.embedding, det.box, det.location)


def init_tentative(det: Detection, track_id: int,
                   kf: ConstantVelocityFilter = DEFAULT_FILTER) -> Trajectory:
    """Start a one-entry tentative trajectory at a detection, with zero velocity."""
    return Trajectory(id=track_id, entries=[_entry(det)], motion=kf.initiate(det.box))


def extend(traj: Trajectory, det: Detection) -> Trajectory:
    """Append the detection's (appearance, box, location) to ``traj``."""
    if det.frame <= traj.last_frame:
        raise ValueError(f"cannot extend trajectory {traj.id} at frame {det.frame}: "
                         f"last frame is {traj.last_frame}")
    traj.append(_entry(det))
    return traj


class Tracker:
    """Frame-by-frame multi-object tracker.

    Call :meth:`step` once per frame with consecutive frame numbers.  Only
    confirmed trajectories matched at the current frame are emitted.
    """

    def __init__(self, pano_width: float, config: TrackerConfig = TrackerConfig(),
                 kf: ConstantVelocityFilter = DEFAULT_FILTER):
        self.pano_width = pano_width
        self.config = config
        self.kf = kf
        self.trajectories: List[Trajectory] = []
        self.frame: Optional[int] = None
        self.next_id = 1

    def _new_id(self) -> int:
        track_id = self.next_id
        self.next_id += 1
        return track_id

    def step(self, frame: int, detections: Sequence[Detection]) -> List[EmittedTrack]:
        if self.frame is not None and frame != self.frame + 1:
            raise ValueError(f"expected frame {self.frame + 1}, got {frame}")
        for det in detections:
            if det.frame != frame:
                raise ValueError(f"detection stamped frame {det.frame} passed at frame {frame}")
            if det.box.pano_width != self.pano_width:
                raise ValueError("detection panorama width differs from the tracker's")
        self.frame = frame
        cfg = self.config

        for traj in self.trajectories:
            traj.motion, traj.predicted_box = self.kf.predict(traj.motion, self.pano_width)

        A = affinity_matrix(self.trajectories, detections, frame, cfg.affinity)
        X = solve_matching(A, cfg.objective)
        result = gate(X, A, cfg.affinity.gate)

        for u, v in result.pairs:
            traj, det = self.trajectories[u], detections[v]
            extend(traj, det)
            traj.motion = self.kf.update(traj.motion, det.box, self.pano_width)
            traj.hits += 1
            traj.misses = 0
            if traj.state is TrackState.TENTATIVE and traj.hits >= cfg.confirm_hits:
                traj.transition(TrackState.CONFIRMED)

        for u in result.unmatched_trajs:
            traj = self.trajectories[u]
            traj.misses += 1
            traj.hits = 0
            limit = cfg.tentative_grace if traj.state is TrackState.TENTATIVE else cfg.max_misses
            if traj.misses > limit:
                traj.transition(TrackState.REMOVED)

        for v in result.unmatched_dets:
            traj = init_tentative(detections[v], self._new_id(), self.kf)
            if cfg.confirm_hits <= 1:
                traj.transition(TrackState.CONFIRMED)
            self.trajectories.append(traj)

        for traj in self.trajectories:
            if traj.state is TrackState.REMOVED:
                log.debug("frame %d: removed trajectory %d", frame, traj.id)
        self.trajectories = [t for t in self.trajectories if t.state is not TrackState.REMOVED]

        emitted = [EmittedTrack(frame, t.id, t.last_box) for t in self.trajectories
                   if t.state is TrackState.CONFIRMED and t.last_frame == frame]
        emitted.sort(key=lambda e: e.id)
        if len({e.id for e in emitted}) != len(emitted):
            raise InvariantError(f"duplicate ids emitted at frame {frame}")
        return emitted


def run_tracker(frames: Dict[int, Sequence[Detection]], pano_width: float,
                config: TrackerConfig = TrackerConfig(), first: Optional[int] = None,
                last: Optional[int] = None) -> List[EmittedTrack]:
    """Run over consecutive frames ``first..last``; missing frames are empty."""
    if first is None:
        first = min(frames) if frames else 1
    if last is None:
        last = max(frames) if frames else first - 1
    tracker = Tracker(pano_width, config)
    out: List[EmittedTrack] = []
    for t in range(first, last + 1):
        out.extend(tracker.step(t, frames.get(t, [])))
    return out
