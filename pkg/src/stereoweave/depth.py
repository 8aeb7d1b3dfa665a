"""Depth normalization and flow-aligned temporal smoothing.

Smoothing runs on raw depth; normalization maps the sequence-global range
onto [lo, hi] afterwards.  A neighbor frame contributes to a pixel only
when every flow hop on the chain lands in bounds and passes the
forward-backward round-trip test (< 1 px), which is what suppresses
occlusion outliers.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    DegenerateRangeWarning,
    FlowDimensionMismatch,
    InvalidRange,
)
from .types import DepthMap

ROUNDTRIP_TOL_PX = 1.0


@dataclass(frozen=True)
class DepthSequence:
    """Per-frame depth maps sharing one resolution.

    `normalized` asserts the sequence-global range is [1, 10] (a constant
    sequence collapses to the lower bound).
    """

    frames: tuple
    normalized: bool = False

    def __post_init__(self):
        frames = tuple(self.frames)
        object.__setattr__(self, "frames", frames)
        if not frames:
            raise InvalidRange("empty depth sequence")
        shape = frames[0].data.shape
        for i, f in enumerate(frames):
            if f.data.shape != shape:
                raise FlowDimensionMismatch(
                    f"depth frame {i}: {f.data.shape} vs {shape}")
        if self.normalized:
            lo = min(float(f.data.min()) for f in frames)
            hi = max(float(f.data.max()) for f in frames)
            if abs(lo - 1.0) > 1e-6 or not (
                    abs(hi - 10.0) <= 1e-6 or abs(hi - 1.0) <= 1e-6):
                raise InvalidRange(
                    f"normalized sequence must span [1, 10], got [{lo}, {hi}]")

    def __len__(self):
        return len(self.frames)

    @property
    def shape(self):
        return self.frames[0].data.shape


def normalize_depth(seq: DepthSequence, lo: float = 1.0,
                    hi: float = 10.0) -> DepthSequence:
    """Affine-map the sequence-global depth range onto [lo, hi].

    A degenerate (constant) sequence maps to the constant lo and emits a
    DegenerateRangeWarning.
    """
    if seq.normalized:
        raise InvalidRange("sequence is already normalized")
    if not (hi > lo > 0):
        raise InvalidRange(f"need hi > lo > 0, got lo={lo} hi={hi}")
    dmin = min(float(f.data.min()) for f in seq.frames)
    dmax = max(float(f.data.max()) for f in seq.frames)
    lo32, span = np.float32(lo), np.float32(hi - lo)
    if dmax - dmin < 1e-12:
        warnings.warn("constant depth sequence, mapping to the lower bound",
                      DegenerateRangeWarning)
        frames = [DepthMap(np.full(f.data.shape, lo32, dtype=np.float32))
                  for f in seq.frames]
        return DepthSequence(tuple(frames), normalized=(lo == 1.0 and hi == 10.0))
    dmin32 = np.float32(dmin)
    rng32 = np.float32(dmax - dmin)
    frames = [
        DepthMap((lo32 + span * ((f.data - dmin32) / rng32)).astype(np.float32))
        for f in seq.frames
    ]
    return DepthSequence(tuple(frames), normalized=(lo == 1.0 and hi == 10.0))


def _check_flow_dims(seq, flows_fwd, flows_bwd):
    n = len(seq)
    if len(flows_fwd) != n - 1 or len(flows_bwd) != n - 1:
        raise FlowDimensionMismatch(
            f"need {n - 1} forward/backward flows, got "
            f"{len(flows_fwd)}/{len(flows_bwd)}")
    h, w = seq.shape
    for i, fl in enumerate(list(flows_fwd) + list(flows_bwd)):
        if (fl.height, fl.width) != (h, w):
            raise FlowDimensionMismatch(
                f"flow {i}: {fl.height}x{fl.width} vs depth {h}x{w}")


def _hop(xs, ys, flow_ab, flow_ba):
    """Advance positions one frame along flow_ab.

    Returns (new_xs, new_ys, ok) where ok requires the sample point in
    bounds for both flows and a round-trip error under 1 px.
    """
    u, ok_u = kernels.bilinear_sample(flow_ab.u, xs, ys)
    v, _ = kernels.bilinear_sample(flow_ab.v, xs, ys)
    nx = (xs + u).astype(np.float32)
    ny = (ys + v).astype(np.float32)
    ub, ok_b = kernels.bilinear_sample(flow_ba.u, nx, ny)
    vb, _ = kernels.bilinear_sample(flow_ba.v, nx, ny)
    ex = nx + ub - xs
    ey = ny + vb - ys
    ok = (ok_u.astype(bool) & ok_b.astype(bool)
          & (ex * ex + ey * ey < ROUNDTRIP_TOL_PX * ROUNDTRIP_TOL_PX))
    return nx, ny, ok


def smooth_depth(seq: DepthSequence, flows_fwd, flows_bwd,
                 window: int = 5, sigma: float = 1.0) -> DepthSequence:
    """Temporal Gaussian smoothing along flow-chained pixel tracks.

    For frame j and offset k (|k| <= window//2) the pixel is followed to
    frame j+k by composing per-frame flows; valid samples are averaged
    with weights exp(-k^2 / 2 sigma^2), renormalized per pixel.  window 1
    is the identity.  flows_fwd[i] maps frame i to i+1, flows_bwd[i] maps
    frame i+1 to i.
    """
    if window < 1 or window % 2 == 0:
        raise InvalidRange(f"window must be odd and positive, got {window}")
    if window == 1:
        return seq
    _check_flow_dims(seq, flows_fwd, flows_bwd)
    n = len(seq)
    h, w = seq.shape
    r = window // 2
    ys0, xs0 = np.mgrid[0:h, 0:w].astype(np.float32)
    weights = {k: float(np.exp(-(k * k) / (2.0 * sigma * sigma)))
               for k in range(-r, r + 1)}

    out = []
    for j in range(n):
        num = seq.frames[j].data.astype(np.float64) * weights[0]
        den = np.full((h, w), weights[0], dtype=np.float64)
        for sign in (1, -1):
            xs, ys = xs0, ys0
            ok = np.ones((h, w), dtype=bool)
            for step in range(1, r + 1):
                k = sign * step
                if not 0 <= j + k < n:
                    break
                if sign > 0:
                    fab, fba = flows_fwd[j + step - 1], flows_bwd[j + step - 1]
                else:
                    fab, fba = flows_bwd[j - step], flows_fwd[j - step]
                xs, ys, hop_ok = _hop(xs, ys, fab, fba)
                ok = ok & hop_ok
                d, d_ok = kernels.bilinear_sample(seq.frames[j + k].data, xs, ys)
                valid = ok & d_ok.astype(bool)
                num += weights[k] * np.where(valid, d, 0.0)
                den += weights[k] * valid
        out.append(DepthMap((num / den).astype(np.float32)))
    # averaging can shrink the global range, so the result is unnormalized
    return DepthSequence(tuple(out), normalized=False)
