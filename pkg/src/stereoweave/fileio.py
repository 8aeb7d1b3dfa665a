"""Bit-exact readers and writers for the pipeline's on-disk artifacts.

Formats: Middlebury .flo flow files, PFM depth maps (both endiannesses),
8/16-bit PNG frames, and binary mask PNGs (0 or 255 only).  All loaders
reject non-finite payloads instead of propagating them.  PNG handling
goes through OpenCV; arrays cross that boundary in BGR order.
"""

import os
import re
import struct

import cv2
import numpy as np

from .errors import (
    BadMagic,
    DimensionMismatch,
    MissingIndex,
    NonFiniteValues,
    NonPositiveDepth,
    TruncatedFile,
    UnsupportedFormat,
)
from .types import DepthMap, DisocclusionMask, FlowField, FrameBuffer

FLO_MAGIC = b"PIEH"


def _require_finite(arr, path):
    if not np.isfinite(arr).all():
        raise NonFiniteValues(f"non-finite values in {path}")


# ---------------------------------------------------------------------------
# .flo optical flow

def read_flo(path) -> FlowField:
    """Load a Middlebury .flo file (little-endian, interleaved u,v)."""
    with open(path, "rb") as f:
        magic = f.read(4)
        if magic != FLO_MAGIC:
            raise BadMagic(f"{path}: expected {FLO_MAGIC!r}, got {magic!r}")
        header = f.read(8)
        if len(header) != 8:
            raise TruncatedFile(f"{path}: truncated header")
        w, h = struct.unpack("<ii", header)
        if w <= 0 or h <= 0:
            raise TruncatedFile(f"{path}: bad dimensions {w}x{h}")
        payload = f.read(w * h * 2 * 4)
    if len(payload) != w * h * 2 * 4:
        raise TruncatedFile(f"{path}: expected {w * h * 2 * 4} payload bytes")
    data = np.frombuffer(payload, dtype="<f4").reshape(h, w, 2)
    _require_finite(data, path)
    return FlowField(np.ascontiguousarray(data))


def write_flo(path, flow: FlowField):
    data = np.asarray(flow.data, dtype="<f4")
    with open(path, "wb") as f:
        f.write(FLO_MAGIC)
        f.write(struct.pack("<ii", flow.width, flow.height))
        f.write(data.tobytes())


# ---------------------------------------------------------------------------
# PFM

def read_pfm(path):
    """Load a PFM image.  Returns (array, scale_magnitude).

    Grayscale ("Pf") gives (H, W), color ("PF") gives (H, W, 3).  Rows are
    stored bottom-up in the file and flipped here; a negative scale marks
    little-endian payloads, and the magnitude multiplies the samples.
    """
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header == b"PF":
            channels = 3
        elif header == b"Pf":
            channels = 1
        else:
            raise BadMagic(f"{path}: not a PFM file (header {header!r})")
        dims = f.readline().split()
        if len(dims) != 2:
            raise TruncatedFile(f"{path}: bad dimension line")
        w, h = int(dims[0]), int(dims[1])
        scale = float(f.readline().strip())
        endian = "<" if scale < 0 else ">"
        count = w * h * channels
        payload = f.read(count * 4)
    if len(payload) != count * 4:
        raise TruncatedFile(f"{path}: expected {count * 4} payload bytes")
    data = np.frombuffer(payload, dtype=endian + "f4").astype(np.float32)
    data = data.reshape(h, w) if channels == 1 else data.reshape(h, w, 3)
    data = np.ascontiguousarray(data[::-1])  # bottom-up storage
    _require_finite(data, path)
    mag = abs(scale)
    if mag != 1.0:
        data = (data * np.float32(mag)).astype(np.float32)
    return data, mag


def write_pfm(path, data, little_endian: bool = True):
    """Write a grayscale or color PFM (scale ±1, bottom-up rows)."""
    data = np.asarray(data, dtype=np.float32)
    if data.ndim == 2:
        header = b"Pf"
    elif data.ndim == 3 and data.shape[2] == 3:
        header = b"PF"
    else:
        raise UnsupportedFormat(f"cannot encode shape {data.shape} as PFM")
    h, w = data.shape[:2]
    endian = "<f4" if little_endian else ">f4"
    scale = -1.0 if little_endian else 1.0
    with open(path, "wb") as f:
        f.write(header + b"\n")
        f.write(f"{w} {h}\n".encode())
        f.write(f"{scale}\n".encode())
        f.write(np.ascontiguousarray(data[::-1]).astype(endian).tobytes())


# ---------------------------------------------------------------------------
# depth

def read_depth(path, format: str = "pfm", scale: float = 1.0,
               inverse: bool = False) -> DepthMap:
    """Load a depth map in raw (pre-normalization) units.

    format "pfm" reads a grayscale PFM; "png16" reads a 16-bit PNG and
    multiplies integer codes by `scale`.  `inverse` reciprocates the
    loaded values for estimators that emit inverse depth.
    """
    if format == "pfm":
        data, _ = read_pfm(path)
        if data.ndim != 2:
            raise UnsupportedFormat(f"{path}: depth PFM must be grayscale")
    elif format == "png16":
        raw = cv2.imread(os.fspath(path), cv2.IMREAD_UNCHANGED)
        if raw is None:
            raise UnsupportedFormat(f"{path}: unreadable PNG")
        if raw.ndim != 2 or raw.dtype != np.uint16:
            raise UnsupportedFormat(f"{path}: expected single-channel 16-bit PNG")
        data = raw.astype(np.float32) * np.float32(scale)
    else:
        raise UnsupportedFormat(f"unknown depth format {format!r}")
    if (data <= 0).any():
        raise NonPositiveDepth(f"{path}: depth contains non-positive values")
    if inverse:
        data = (np.float32(1.0) / data).astype(np.float32)
    return DepthMap(data)


def write_depth_png16(path, depth: DepthMap, scale: float):
    """Quantize depth/scale to uint16 codes and write a PNG."""
    codes = np.round(depth.data / np.float32(scale))
    codes = np.clip(codes, 0, 65535).astype(np.uint16)
    cv2.imwrite(os.fspath(path), codes)


# ---------------------------------------------------------------------------
# PNG frames

def _srgb_to_linear(x):
    a = np.float32(0.055)
    lo = x / np.float32(12.92)
    hi = ((x + a) / (np.float32(1.0) + a)) ** np.float32(2.4)
    return np.where(x <= np.float32(0.04045), lo, hi).astype(np.float32)


def read_frame(path, srgb: bool = False) -> FrameBuffer:
    """Load an 8- or 16-bit PNG as a [0,1] float frame (RGB order)."""
    raw = cv2.imread(os.fspath(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise UnsupportedFormat(f"{path}: unreadable image")
    if raw.dtype == np.uint8:
        denom = 255.0
    elif raw.dtype == np.uint16:
        denom = 65535.0
    else:
        raise UnsupportedFormat(f"{path}: unsupported sample type {raw.dtype}")
    if raw.ndim == 3:
        if raw.shape[2] == 4:
            raw = raw[:, :, :3]  # drop alpha
        raw = raw[:, :, ::-1]  # BGR -> RGB
    data = (raw.astype(np.float32) / np.float32(denom)).astype(np.float32)
    if srgb:
        data = _srgb_to_linear(data)
    return FrameBuffer(np.ascontiguousarray(data))


def write_frame(path, frame: FrameBuffer, bits: int = 8):
    """Write a frame as 8- or 16-bit PNG (values are clipped to [0,1])."""
    if bits == 8:
        maxv, dt = 255.0, np.uint8
    elif bits == 16:
        maxv, dt = 65535.0, np.uint16
    else:
        raise UnsupportedFormat(f"unsupported PNG depth {bits}")
    data = np.clip(frame.data, 0.0, 1.0)
    codes = np.round(data * np.float32(maxv)).astype(dt)
    if codes.ndim == 3 and codes.shape[2] == 3:
        codes = codes[:, :, ::-1]  # RGB -> BGR
    elif codes.ndim == 3:
        codes = codes[:, :, 0]
    cv2.imwrite(os.fspath(path), np.ascontiguousarray(codes))


# ---------------------------------------------------------------------------
# masks

def read_mask(path) -> DisocclusionMask:
    """Load a binary mask PNG; only the codes 0 and 255 are legal."""
    raw = cv2.imread(os.fspath(path), cv2.IMREAD_GRAYSCALE)
    if raw is None:
        raise UnsupportedFormat(f"{path}: unreadable mask")
    vals = np.unique(raw)
    if not np.isin(vals, (0, 255)).all():
        raise UnsupportedFormat(f"{path}: mask codes must be 0 or 255, got {vals}")
    return DisocclusionMask((raw == 255).astype(np.uint8))


def write_mask(path, mask: DisocclusionMask):
    cv2.imwrite(os.fspath(path), (mask.data * np.uint8(255)).astype(np.uint8))


# ---------------------------------------------------------------------------
# sequences

def list_indexed(dir_path, pattern: str):
    """Ordered paths dir/pattern.format(0..n-1), contiguously numbered.

    The pattern must contain one integer format field.  Raises
    MissingIndex when no index 0 exists or the numbering has gaps.
    """
    m = re.fullmatch(r"(.*)\{[^{}]*\}(.*)", pattern)
    if m is None:
        raise UnsupportedFormat(f"pattern {pattern!r} has no index field")
    regex = re.compile(re.escape(m.group(1)) + r"(\d+)" + re.escape(m.group(2)))
    present = set()
    for name in os.listdir(dir_path):
        hit = regex.fullmatch(name)
        if hit:
            present.add(int(hit.group(1)))
    if not present:
        raise MissingIndex(f"{dir_path}: no files matching {pattern!r}")
    n = max(present) + 1
    missing = sorted(set(range(n)) - present)
    if missing:
        raise MissingIndex(f"{dir_path}: missing indices {missing[:8]}")
    return [os.path.join(dir_path, pattern.format(i)) for i in range(n)]


def read_frame_sequence(dir_path, pattern: str = "f{:03d}.png",
                        srgb: bool = False):
    """Load frames dir/pattern.format(0..n-1), contiguously numbered.

    Raises MissingIndex on absent or gapped numbering, DimensionMismatch
    when frames disagree on size.
    """
    frames = []
    for i, path in enumerate(list_indexed(dir_path, pattern)):
        frame = read_frame(path, srgb=srgb)
        if frames and frame.data.shape != frames[0].data.shape:
            raise DimensionMismatch(
                f"frame {i}: {frame.data.shape} vs {frames[0].data.shape}")
        frames.append(frame)
    return frames
