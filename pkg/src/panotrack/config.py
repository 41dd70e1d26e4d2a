"""Run configuration: an INI file with one section per pipeline stage.

Every key has a default; unknown sections or keys are rejected.  The config
path may also come from the ``PANOTRACK_CONFIG`` environment variable.
"""

from __future__ import annotations

import configparser
import io
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from .affinity import AffinityConfig
from .tracker import TrackerConfig

CONFIG_ENV = "PANOTRACK_CONFIG"

# section -> key -> (default, description)
SCHEMA: Dict[str, Dict[str, Tuple[Any, str]]] = {
    "scene": {
        "pano_width": (3600, "panorama width W in pixels"),
        "pano_height": (480, "panorama height H in pixels"),
        "embedding_dim": (128, "appearance embedding length D"),
    },
    "slices": {
        "n_slices": (7, "number of overlapping slices the panorama is cut into"),
        "overlap": (0.2, "overlap between consecutive slices, as a fraction of slice width"),
    },
    "merge": {
        "mode": ("hard", "NMS applied to each frame's detections: hard, soft or off"),
        "iou_thresh": (0.5, "hard NMS suppresses boxes overlapping a kept box above this IoU"),
        "sigma": (0.5, "soft NMS decay: score *= exp(-iou^2 / sigma)"),
        "score_floor": (0.05, "soft NMS drops boxes whose score falls below this"),
    },
    "fusion": {
        "enabled": (True, "attach 3D locations from point clouds"),
        "band_lo": (10.0, "lower range percentile kept inside a box"),
        "band_hi": (80.0, "upper range percentile kept inside a box"),
    },
    "affinity": {
        "w_app": (1.0, "weight of the appearance term"),
        "w_mot": (1.0, "weight of the motion (predicted-box IoU) term"),
        "w_loc": (1.0, "weight of the 3D location term"),
        "beta_t": (5.0, "time RBF bandwidth in frames"),
        "beta_l": (1.0, "location RBF bandwidth in meters"),
    },
    "association": {
        "objective": ("l2", "matching objective: l2 (norm of matched affinities) or linear"),
        "gate": (0.3, "matched pairs with affinity below this are dissolved"),
    },
    "tracker": {
        "confirm_hits": (3, "consecutive matches that confirm a tentative trajectory"),
        "max_misses": (30, "frames a confirmed trajectory survives without a match"),
        "tentative_grace": (0, "misses a tentative trajectory survives"),
    },
    "eval": {
        "iou_match": (0.5, "minimum IoU for a hypothesis to match ground truth"),
    },
    "paths": {
        "detections": ("", "detections text file"),
        "clouds": ("", "directory of per-frame point clouds named <frame:06d>.bin or .txt"),
        "calibration": ("", "calibration file: 12 matrix entries then W and H"),
        "output": ("tracks.txt", "where `track` writes its output"),
        "gt": ("", "ground-truth tracks for `eval`"),
    },
}


def _parse(raw: str, default: Any):
    if isinstance(default, bool):
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if isinstance(default, int):
        return int(raw)
    if isinstance(default, float):
        return float(raw)
    return raw.strip()


@dataclass
class RunConfig:
    values: Dict[str, Dict[str, Any]] = field(
        default_factory=lambda: {s: {k: d for k, (d, _) in keys.items()} for s, keys in SCHEMA.items()})
    base_dir: Path = field(default_factory=Path.cwd)

    def __getitem__(self, section: str) -> Dict[str, Any]:
        return self.values[section]

    def set(self, section: str, key: str, value) -> None:
        if section not in SCHEMA or key not in SCHEMA[section]:
            raise KeyError(f"unknown config key {section}.{key}")
        self.values[section][key] = value

    def path(self, key: str) -> Optional[Path]:
        raw = self.values["paths"][key]
        if not raw:
            return None
        p = Path(raw)
        return p if p.is_absolute() else self.base_dir / p

    def tracker_config(self) -> TrackerConfig:
        a, s, t = self["affinity"], self["association"], self["tracker"]
        aff = AffinityConfig(a["w_app"], a["w_mot"], a["w_loc"], a["beta_t"], a["beta_l"], s["gate"])
        return TrackerConfig(t["confirm_hits"], t["max_misses"], t["tentative_grace"],
                             s["objective"], aff)

    def validate(self) -> None:
        self.tracker_config()
        if self["merge"]["mode"] not in ("hard", "soft", "off"):
            raise ValueError(f"merge.mode must be hard, soft or off, not {self['merge']['mode']!r}")
        lo, hi = self["fusion"]["band_lo"], self["fusion"]["band_hi"]
        if not 0 <= lo < hi <= 100:
            raise ValueError("fusion band must satisfy 0 <= band_lo < band_hi <= 100")

    def dumps(self) -> str:
        out = io.StringIO()
        for section, keys in SCHEMA.items():
            out.write(f"[{section}]\n")
            for key, (default, doc) in keys.items():
                value = self.values[section][key]
                if isinstance(value, bool):
                    value = "true" if value else "false"
                out.write(f"# {doc} (default: {default!r})\n{key} = {value}\n")
            out.write("\n")
        return out.getvalue()

    def save(self, path) -> None:
        Path(path).write_text(self.dumps())


def load_config(path=None) -> RunConfig:
    """Read a config file; ``None`` falls back to ``$PANOTRACK_CONFIG`` then defaults."""
    if path is None:
        path = os.environ.get(CONFIG_ENV) or None
    cfg = RunConfig()
    if path is None:
        return cfg
    path = Path(path)
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ValueError(f"{path}: {exc}") from None
    for section in parser.sections():
        if section not in SCHEMA:
            raise ValueError(f"{path}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ValueError(f"{path}: unknown key {section}.{key}")
            try:
                cfg.values[section][key] = _parse(raw, SCHEMA[section][key][0])
            except ValueError as exc:
                raise ValueError(f"{path}: {section}.{key}: {exc}") from None
    cfg.base_dir = path.resolve().parent
    cfg.validate()
    return cfg
