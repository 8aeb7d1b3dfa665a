"""Pipeline configuration: defaults, JSON files, flag overrides.

Defaults follow the reference settings: depth normalized to [1, 10],
baseline 0.08 m, 8 views, at most 16 frames, 4 planes, morphology
thresholds 0.5/0.2, T = 1000 with 50 visited steps, resampling 8 then 4.
Precedence is flags > file > defaults.
"""

import dataclasses
import json
import os

from .errors import InvalidRange, MissingIndex, UnsupportedFormat

CODECS = ("identity", "avgpool8", "external")
DENOISERS = ("oracle", "external")
DENOISER_ADDR_ENV = "STEREOWEAVE_DENOISER"


@dataclasses.dataclass(frozen=True)
class PipelineConfig:
    depth_lo: float = 1.0
    depth_hi: float = 10.0
    baseline: float = 0.08
    n_views: int = 8
    max_frames: int = 16
    focal_px: float = 512.0
    planes: int = 4
    isolation_threshold: float = 0.5
    crack_threshold: float = 0.2
    T: int = 1000
    steps: int = 50
    resample_hi: int = 8
    resample_lo: int = 4
    beta_lo: float = 1e-4
    beta_hi: float = 0.02
    codec: str = "identity"
    denoiser: str = "oracle"
    denoiser_addr: str = ""
    reinject: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.depth_lo < self.depth_hi:
            raise InvalidRange(
                f"depth range [{self.depth_lo}, {self.depth_hi}]")
        if self.baseline < 0:
            raise InvalidRange(f"baseline {self.baseline}")
        if self.n_views < 1 or self.max_frames < 1 or self.planes < 1:
            raise InvalidRange("n_views, max_frames, planes must be >= 1")
        if self.focal_px <= 0:
            raise InvalidRange(f"focal_px {self.focal_px}")
        for name in ("isolation_threshold", "crack_threshold"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise InvalidRange(f"{name} {v} outside [0, 1]")
        if not 1 <= self.steps <= self.T:
            raise InvalidRange(f"steps {self.steps} vs T {self.T}")
        if self.resample_hi < 1 or self.resample_lo < 1:
            raise InvalidRange("resample counts must be >= 1")
        if not 0 < self.beta_lo <= self.beta_hi < 1:
            raise InvalidRange(
                f"beta endpoints [{self.beta_lo}, {self.beta_hi}]")
        if self.codec not in CODECS:
            raise InvalidRange(f"codec {self.codec!r} not in {CODECS}")
        if self.denoiser not in DENOISERS:
            raise InvalidRange(
                f"denoiser {self.denoiser!r} not in {DENOISERS}")

    def to_dict(self):
        return dataclasses.asdict(self)


_FIELDS = {f.name for f in dataclasses.fields(PipelineConfig)}


def load_config(path=None, overrides=None) -> PipelineConfig:
    """Merge defaults <- JSON file <- non-None overrides.

    The file may be a plain config object or a run manifest (its
    embedded "config" object is used), so a past run reproduces itself.
    """
    merged = {}
    if path is not None:
        if not os.path.exists(path):
            raise MissingIndex(f"config file {path} does not exist")
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise UnsupportedFormat(f"{path}: {exc}") from exc
        if not isinstance(data, dict):
            raise UnsupportedFormat(f"{path}: top level must be an object")
        if "config" in data and "command" in data:
            data = data["config"]
        unknown = set(data) - _FIELDS
        if unknown:
            raise UnsupportedFormat(
                f"{path}: unknown config keys {sorted(unknown)}")
        merged.update(data)
    for key, value in (overrides or {}).items():
        if key not in _FIELDS:
            raise InvalidRange(f"unknown config field {key!r}")
        if value is not None:
            merged[key] = value
    return PipelineConfig(**merged)
