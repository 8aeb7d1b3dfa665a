"""The frame matrix: warped views of a video over a camera trajectory.

Rows index time (S+1 frames), columns index views (V+1 cameras); column
0 is the reference video copied verbatim with all-known masks.  A column
is a fixed-camera video, a row is a fixed-time sweep across views; both
accessors return numpy views over one shared storage block.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from . import fileio
from .errors import (
    DimensionMismatch,
    InvalidViewCount,
    MissingIndex,
    ShapeMismatch,
    UnnormalizedDepth,
)
from .types import DisocclusionMask, FrameBuffer
from .warp import CameraOffset, warp_video

MANIFEST_NAME = "manifest.json"
FRAME_PATTERN = "f{:03d}.png"
MASK_PATTERN = "m{:03d}.png"
VIEW_DIR = "v{:02d}"


@dataclass(frozen=True)
class Trajectory:
    """V+1 camera offsets; view 0 is the zero-offset reference."""

    kind: str
    views: tuple

    def __post_init__(self):
        views = tuple(self.views)
        object.__setattr__(self, "views", views)
        if len(views) < 1:
            raise InvalidViewCount("trajectory needs at least one view")
        v0 = views[0]
        if v0.offset_x != 0.0 or v0.offset_y != 0.0:
            raise InvalidViewCount("view 0 must be the zero-offset reference")
        if self.kind == "linear":
            xs = [v.offset_x for v in views]
            if any(b < a for a, b in zip(xs, xs[1:])):
                raise InvalidViewCount("linear offsets must be non-decreasing")

    @property
    def n_views(self):
        return len(self.views)


def build_linear_trajectory(baseline: float = 0.08, n_views: int = 8,
                            focal_px: float = 512.0) -> Trajectory:
    """Views evenly spaced along the baseline: offsets baseline*k/(V).

    View 0 is the left eye, the last view the right eye.
    """
    if n_views < 2:
        raise InvalidViewCount(f"need at least 2 views, got {n_views}")
    views = tuple(
        CameraOffset(offset_x=baseline * k / (n_views - 1), focal_px=focal_px)
        for k in range(n_views))
    return Trajectory("linear", views)


def build_spiral_trajectory(baseline: float = 0.08, n_views: int = 8,
                            focal_px: float = 512.0, amp_x: float = 1.0,
                            amp_y: float = 0.5) -> Trajectory:
    """A closed sinusoidal sweep for free-viewpoint previews.

    Offsets (b sin(2 pi k / K) a_x, b (1 - cos(2 pi k / K)) a_y); k = 0
    is the zero-offset reference.
    """
    if n_views < 2:
        raise InvalidViewCount(f"need at least 2 views, got {n_views}")
    views = []
    for k in range(n_views):
        th = 2.0 * np.pi * k / n_views
        views.append(CameraOffset(
            offset_x=baseline * np.sin(th) * amp_x,
            offset_y=baseline * (1.0 - np.cos(th)) * amp_y,
            focal_px=focal_px))
    return Trajectory("spiral", tuple(views))


@dataclass(frozen=True)
class FrameMatrix:
    """(S+1) x (V+1) grid of frames and disocclusion masks.

    frames: (S+1, V+1, H, W, C) float32 in [0,1]; masks: (S+1, V+1, H, W)
    uint8 in {0,1}.  Immutable after construction.
    """

    frames: np.ndarray
    masks: np.ndarray
    trajectory: Trajectory
    prompt: str = ""

    def __post_init__(self):
        f, m = np.asarray(self.frames), np.asarray(self.masks)
        if f.ndim != 5 or m.ndim != 4 or f.shape[:4] != m.shape:
            raise ShapeMismatch(f"frames {f.shape} vs masks {m.shape}")
        if f.shape[1] != self.trajectory.n_views:
            raise ShapeMismatch(
                f"{f.shape[1]} columns vs {self.trajectory.n_views} views")
        if not (m[:, 0] == 1).all():
            raise ShapeMismatch("column 0 (reference) masks must be all-known")
        f = np.ascontiguousarray(f, dtype=np.float32)
        m = np.ascontiguousarray(m, dtype=np.uint8)
        f.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "frames", f)
        object.__setattr__(self, "masks", m)

    @property
    def n_frames(self):
        return self.frames.shape[0]

    @property
    def n_views(self):
        return self.frames.shape[1]

    def row(self, s):
        """All views at time s: views over shared storage, no copies."""
        return self.frames[s], self.masks[s]

    def column(self, v):
        """The fixed-camera video of view v (views over shared storage)."""
        return self.frames[:, v], self.masks[:, v]

    def frame(self, s, v) -> FrameBuffer:
        return FrameBuffer(self.frames[s, v])

    def mask(self, s, v) -> DisocclusionMask:
        return DisocclusionMask(self.masks[s, v])


def build_frame_matrix(rgb_seq, depth_seq, traj: Trajectory,
                       n_planes: int = 4, prompt: str = "") -> FrameMatrix:
    """Warp the reference video into every trajectory view.

    Column 0 is the input copied verbatim with all-ones masks; column v
    comes from warp_video at traj.views[v].
    """
    if not depth_seq.normalized:
        raise UnnormalizedDepth("depth must be normalized before warping")
    if len(rgb_seq) != len(depth_seq.frames):
        raise ShapeMismatch(
            f"{len(rgb_seq)} frames vs {len(depth_seq.frames)} depth maps")
    s1 = len(rgb_seq)
    v1 = traj.n_views
    h, w, c = rgb_seq[0].data.shape
    frames = np.empty((s1, v1, h, w, c), dtype=np.float32)
    masks = np.empty((s1, v1, h, w), dtype=np.uint8)
    for s, fb in enumerate(rgb_seq):
        frames[s, 0] = fb.data
        masks[s, 0] = 1
    for v in range(1, v1):
        col_frames, col_masks = warp_video(rgb_seq, depth_seq, traj.views[v],
                                           n_planes)
        for s in range(s1):
            frames[s, v] = col_frames[s].data
            masks[s, v] = col_masks[s].data
    return FrameMatrix(frames, masks, traj, prompt)


# ---------------------------------------------------------------------------
# persistence

def _trajectory_to_dict(traj: Trajectory):
    return {
        "kind": traj.kind,
        "focal_px": traj.views[0].focal_px,
        "max_baseline": traj.views[0].max_baseline,
        "views": [{"x": v.offset_x, "y": v.offset_y} for v in traj.views],
    }


def _trajectory_from_dict(d):
    views = tuple(
        CameraOffset(offset_x=v["x"], offset_y=v["y"], focal_px=d["focal_px"],
                     max_baseline=d["max_baseline"])
        for v in d["views"])
    return Trajectory(d["kind"], views)


def save_matrix(fm: FrameMatrix, root):
    """Write v{v:02}/f{s:03}.png + m{s:03}.png per cell plus a manifest."""
    os.makedirs(root, exist_ok=True)
    for v in range(fm.n_views):
        vdir = os.path.join(root, VIEW_DIR.format(v))
        os.makedirs(vdir, exist_ok=True)
        for s in range(fm.n_frames):
            fileio.write_frame(os.path.join(vdir, FRAME_PATTERN.format(s)),
                               fm.frame(s, v), bits=16)
            fileio.write_mask(os.path.join(vdir, MASK_PATTERN.format(s)),
                              fm.mask(s, v))
    manifest = {
        "layout": "frame-matrix-v1",
        "n_frames": fm.n_frames,
        "n_views": fm.n_views,
        "height": fm.frames.shape[2],
        "width": fm.frames.shape[3],
        "channels": fm.frames.shape[4],
        "png_bits": 16,
        "prompt": fm.prompt,
        "trajectory": _trajectory_to_dict(fm.trajectory),
    }
    with open(os.path.join(root, MANIFEST_NAME), "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")


def load_matrix(root) -> FrameMatrix:
    """Inverse of save_matrix (frames quantized to the 16-bit lattice)."""
    mpath = os.path.join(root, MANIFEST_NAME)
    if not os.path.exists(mpath):
        raise MissingIndex(f"{root}: no {MANIFEST_NAME}")
    with open(mpath) as f:
        manifest = json.load(f)
    traj = _trajectory_from_dict(manifest["trajectory"])
    s1, v1 = manifest["n_frames"], manifest["n_views"]
    h, w, c = manifest["height"], manifest["width"], manifest["channels"]
    frames = np.empty((s1, v1, h, w, c), dtype=np.float32)
    masks = np.empty((s1, v1, h, w), dtype=np.uint8)
    for v in range(v1):
        vdir = os.path.join(root, VIEW_DIR.format(v))
        col = fileio.read_frame_sequence(vdir, FRAME_PATTERN)
        if len(col) != s1:
            raise MissingIndex(f"{vdir}: {len(col)} frames, manifest says {s1}")
        for s in range(s1):
            data = col[s].data
            if data.shape != (h, w, c):
                raise DimensionMismatch(
                    f"{vdir} frame {s}: {data.shape} vs manifest {(h, w, c)}")
            frames[s, v] = data
            mp = os.path.join(vdir, MASK_PATTERN.format(s))
            if not os.path.exists(mp):
                raise MissingIndex(f"{vdir}: missing mask {s}")
            mask = fileio.read_mask(mp)
            if mask.data.shape != (h, w):
                raise DimensionMismatch(
                    f"{vdir} mask {s}: {mask.data.shape} vs {(h, w)}")
            masks[s, v] = mask.data
    return FrameMatrix(frames, masks, traj, manifest.get("prompt", ""))
