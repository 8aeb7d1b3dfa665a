"""Core image containers.

All containers wrap read-only numpy arrays and validate their invariants at
construction, so they are safe to share between threads and cache by
identity.  Pixel data is float32 throughout: RGB in [0, 1], depth in metric
units, flow in pixels.  Masks are uint8 with values in {0, 1} where
1 = known (valid warped content) and 0 = disoccluded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvariantError, NonFiniteValues


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class FrameBuffer:
    """H x W x C float32 image, C in {1, 3}, row-major, channel-interleaved."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim == 2:
            data = data[:, :, None]
        if data.ndim != 3 or data.shape[2] not in (1, 3):
            raise InvariantError(f"frame must be HxWx1 or HxWx3, got {data.shape}")
        if not np.isfinite(data).all():
            raise NonFiniteValues("frame contains non-finite samples")
        if data.min() < 0.0 or data.max() > 1.0:
            raise InvariantError("frame samples must lie in [0, 1]")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class DepthMap:
    """H x W float32 depth, strictly positive."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim != 2:
            raise InvariantError(f"depth must be HxW, got {data.shape}")
        if not np.isfinite(data).all():
            raise NonFiniteValues("depth contains non-finite values")
        if data.min() <= 0.0:
            raise InvariantError("depth values must be strictly positive")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class FlowField:
    """H x W x 2 float32 displacement field (u = horizontal, v = vertical)."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.float32)
        if data.ndim != 3 or data.shape[2] != 2:
            raise InvariantError(f"flow must be HxWx2, got {data.shape}")
        if not np.isfinite(data).all():
            raise NonFiniteValues("flow contains non-finite values")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def u(self) -> np.ndarray:
        return self.data[:, :, 0]

    @property
    def v(self) -> np.ndarray:
        return self.data[:, :, 1]


@dataclass(frozen=True)
class DisocclusionMask:
    """H x W uint8 mask, 1 = known content, 0 = disoccluded."""

    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2:
            raise InvariantError(f"mask must be HxW, got {data.shape}")
        data = data.astype(np.uint8, copy=True)
        if not np.isin(data, (0, 1)).all():
            raise InvariantError("mask values must be exactly 0 or 1")
        object.__setattr__(self, "data", _freeze(data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def known_fraction(self) -> float:
        return float(self.data.mean())


def stack_frames(frames: list[FrameBuffer]) -> np.ndarray:
    """Stack a frame list into an (S, H, W, C) float32 array; sizes must agree."""
    if not frames:
        raise InvariantError("empty frame sequence")
    shape = frames[0].data.shape
    for f in frames[1:]:
        if f.data.shape != shape:
            raise DimensionMismatch(f"frame size {f.data.shape} != {shape}")
    return np.stack([f.data for f in frames])


def unstack_frames(arr: np.ndarray) -> list[FrameBuffer]:
    return [FrameBuffer(arr[i]) for i in range(arr.shape[0])]


def stack_masks(masks: list[DisocclusionMask]) -> np.ndarray:
    if not masks:
        raise InvariantError("empty mask sequence")
    shape = masks[0].data.shape
    for m in masks[1:]:
        if m.data.shape != shape:
            raise DimensionMismatch(f"mask size {m.data.shape} != {shape}")
    return np.stack([m.data for m in masks])
