"""Forward warping to shifted cameras via multi-plane images.

A frame is split into N depth planes (uniform in inverse depth over
[1, 10], plane 0 nearest), each source pixel is point-splatted into its
plane at the disparity-shifted location with a per-plane z-buffer, plane
masks are cleaned (isolated points removed, cracks filled), and the
planes are alpha-blended back to front.  Pixels no plane covers are the
disocclusions; they stay black and drive the inpainting stage.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    BaselineTooLarge,
    InvalidRange,
    ShapeMismatch,
    UnnormalizedDepth,
)
from .types import DepthMap, DisocclusionMask, FrameBuffer

DEPTH_LO = 1.0
DEPTH_HI = 10.0
DEFAULT_PLANES = 4
MAX_BASELINE = 0.20
ISOLATION_THRESHOLD = 0.5  # of a normalized 3x3 box response
CRACK_THRESHOLD = 0.2      # of a normalized 3x3 Gaussian response


@dataclass(frozen=True)
class CameraOffset:
    """Pure-translation camera displacement along the stereo baseline.

    offset_x is meters along the baseline (positive = rightward), and
    offset_y the optional vertical component used by spiral trajectories.
    Disparity per axis is focal_px * offset / depth.
    """

    offset_x: float
    focal_px: float
    offset_y: float = 0.0
    max_baseline: float = MAX_BASELINE

    def __post_init__(self):
        mag = (self.offset_x ** 2 + self.offset_y ** 2) ** 0.5
        if mag > self.max_baseline + 1e-12:
            raise BaselineTooLarge(
                f"|offset| = {mag:.4f} exceeds max baseline {self.max_baseline}")
        if self.focal_px <= 0:
            raise InvalidRange(f"focal_px must be positive, got {self.focal_px}")


@dataclass(frozen=True)
class PlaneLayer:
    image: FrameBuffer
    mask: DisocclusionMask
    depth_range: tuple  # [near, far)


@dataclass(frozen=True)
class MultiPlaneStack:
    """Ordered list of depth planes, nearest first.

    Every source pixel lands in exactly one plane; distinct planes may
    still cover the same target position, which the back-to-front blend
    resolves in favor of the nearer plane.
    """

    planes: tuple

    def __post_init__(self):
        planes = tuple(self.planes)
        object.__setattr__(self, "planes", planes)
        if not planes:
            raise InvalidRange("stack needs at least one plane")
        shape = planes[0].image.data.shape
        for p in planes:
            if p.image.data.shape != shape:
                raise ShapeMismatch("plane images disagree on shape")
        near = planes[0].depth_range[0]
        if abs(near - DEPTH_LO) > 1e-9:
            raise InvalidRange("planes must start at the near depth bound")
        for a, b in zip(planes, planes[1:]):
            if abs(a.depth_range[1] - b.depth_range[0]) > 1e-9:
                raise InvalidRange("plane depth ranges must be contiguous")
        if abs(planes[-1].depth_range[1] - DEPTH_HI) > 1e-9:
            raise InvalidRange("planes must end at the far depth bound")

    def __len__(self):
        return len(self.planes)


def plane_edges(n_planes: int = DEFAULT_PLANES):
    """Plane boundary depths, increasing from 1 to 10.

    Uniform in inverse depth, so every plane spans an equal disparity
    range; plane i covers [edges[i], edges[i+1]).
    """
    if n_planes < 1:
        raise InvalidRange(f"need at least one plane, got {n_planes}")
    inv = np.linspace(1.0 / DEPTH_LO, 1.0 / DEPTH_HI, n_planes + 1)
    return (1.0 / inv).astype(np.float64)


def plane_index(depth: np.ndarray, n_planes: int = DEFAULT_PLANES):
    """Index of the plane whose [near, far) range holds each depth.

    Compared against the actual edge values so boundaries are exact; the
    far bound 10 belongs to the last plane.
    """
    edges = plane_edges(n_planes)
    idx = np.searchsorted(edges, depth.astype(np.float64), side="right") - 1
    return np.clip(idx, 0, n_planes - 1).astype(np.int32)


def disparity(depth: np.ndarray, offset: float, focal_px: float):
    """Per-pixel shift in pixels: focal * offset / depth, float64."""
    return focal_px * offset / depth.astype(np.float64)


def splat_to_planes(rgb: FrameBuffer, depth: DepthMap, cam: CameraOffset,
                    n_planes: int = DEFAULT_PLANES) -> MultiPlaneStack:
    """Point-splat each pixel into its depth plane at the shifted site.

    Targets use round-to-nearest (half up); within a plane the nearer
    source wins.  Requires depth normalized to [1, 10].
    """
    if rgb.data.shape[:2] != depth.data.shape:
        raise ShapeMismatch(
            f"rgb {rgb.data.shape[:2]} vs depth {depth.data.shape}")
    d = depth.data
    if d.min() < DEPTH_LO - 1e-5 or d.max() > DEPTH_HI + 1e-5:
        raise UnnormalizedDepth(
            f"depth range [{d.min():.3f}, {d.max():.3f}] outside "
            f"[{DEPTH_LO}, {DEPTH_HI}]")
    h, w = d.shape
    ys, xs = np.mgrid[0:h, 0:w]
    # positive offset moves the camera right, so content shifts left
    tx = np.floor(xs - disparity(d, cam.offset_x, cam.focal_px) + 0.5)
    ty = np.floor(ys - disparity(d, cam.offset_y, cam.focal_px) + 0.5)
    pidx = plane_index(d, n_planes)
    planes, masks = kernels.forward_splat(
        rgb.data, d, tx.astype(np.int32), ty.astype(np.int32), pidx, n_planes)
    edges = plane_edges(n_planes)
    return MultiPlaneStack(tuple(
        PlaneLayer(FrameBuffer(planes[i]), DisocclusionMask(masks[i]),
                   (float(edges[i]), float(edges[i + 1])))
        for i in range(n_planes)))


def remove_isolated(stack: MultiPlaneStack,
                    threshold: float = ISOLATION_THRESHOLD) -> MultiPlaneStack:
    """Clear pixels whose normalized 3x3 box response is below threshold.

    Zero padding makes the test conservative at borders: image corners
    of even a fully covered plane fail it (4/9 < 0.5) and are refilled
    by the crack pass from their surviving neighbors.
    """
    out = []
    for p in stack.planes:
        counts = kernels.box3_sum(p.mask.data)
        keep = (p.mask.data != 0) & (counts >= threshold * 9.0)
        keep8 = keep.astype(np.uint8)
        out.append(PlaneLayer(
            FrameBuffer(p.image.data * keep8[:, :, None].astype(np.float32)),
            DisocclusionMask(keep8), p.depth_range))
    return MultiPlaneStack(tuple(out))


def fill_cracks(stack: MultiPlaneStack,
                threshold: float = CRACK_THRESHOLD) -> MultiPlaneStack:
    """Fill thin holes whose normalized Gaussian response exceeds threshold.

    Crack colors are the Gaussian-weighted mean of valid 3x3 neighbors
    (weights 1-2-1 / 2-4-2 / 1-2-1); all cracks are detected against the
    incoming mask, so the fill does not propagate.
    """
    out = []
    for p in stack.planes:
        gsum = kernels.gauss3_mask_sum(p.mask.data)
        crack = (p.mask.data == 0) & (gsum > threshold * 16.0)
        if crack.any():
            wsum = kernels.gauss3_masked_values(p.image.data, p.mask.data)
            fill = wsum / np.maximum(gsum, np.float32(1e-12))[:, :, None]
            img = np.where(crack[:, :, None], fill, p.image.data)
            img = np.clip(img, 0.0, 1.0).astype(np.float32)
            mask = (p.mask.data | crack).astype(np.uint8)
            out.append(PlaneLayer(FrameBuffer(img), DisocclusionMask(mask),
                                  p.depth_range))
        else:
            out.append(p)
    return MultiPlaneStack(tuple(out))


def blend_planes(stack: MultiPlaneStack):
    """Composite planes back to front: I <- I(1 - M_i) + I_i M_i.

    Returns (frame, mask); the mask is the union of plane masks and
    uncovered (disoccluded) pixels stay black.
    """
    shape = stack.planes[0].image.data.shape
    img = np.zeros(shape, dtype=np.float32)
    mask = np.zeros(shape[:2], dtype=np.uint8)
    for p in reversed(stack.planes):  # far to near
        m = p.mask.data[:, :, None].astype(np.float32)
        img = img * (np.float32(1.0) - m) + p.image.data * m
        mask = mask | p.mask.data
    return FrameBuffer(img.astype(np.float32)), DisocclusionMask(mask)


def warp_frame(rgb: FrameBuffer, depth: DepthMap, cam: CameraOffset,
               n_planes: int = DEFAULT_PLANES, clean: bool = True):
    """splat -> remove_isolated -> fill_cracks -> blend for one frame."""
    stack = splat_to_planes(rgb, depth, cam, n_planes)
    if clean:
        stack = fill_cracks(remove_isolated(stack))
    return blend_planes(stack)


def warp_video(rgb_seq, depth_seq, cam: CameraOffset,
               n_planes: int = DEFAULT_PLANES):
    """Warp every frame of a sequence; returns (frames, masks)."""
    if len(rgb_seq) != len(depth_seq.frames):
        raise ShapeMismatch(
            f"{len(rgb_seq)} frames vs {len(depth_seq.frames)} depth maps")
    frames, masks = [], []
    for rgb, d in zip(rgb_seq, depth_seq.frames):
        f, m = warp_frame(rgb, d, cam, n_planes)
        frames.append(f)
        masks.append(m)
    return frames, masks
