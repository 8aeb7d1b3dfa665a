"""Stereo pair extraction and output composition.

The inpainted frame matrix yields the final stereo video by taking the
leftmost and rightmost columns.  Composers are pure pixel rearrangements
(no resampling), so saved outputs are bit-reproducible.
"""

import os
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch, UninpaintedMatrixWarning
from .fileio import write_frame
from .types import FrameBuffer

FORMATS = ("left", "right", "sbs", "anaglyph")
FRAME_PATTERN = "f{:03d}.png"
SEPARATOR_PX = 2
SEPARATOR_VALUE = 0.5


@dataclass(frozen=True)
class StereoPairSequence:
    """Paired left/right frame sequences of equal length and size."""

    left: tuple
    right: tuple

    def __post_init__(self):
        left = tuple(self.left)
        right = tuple(self.right)
        if len(left) != len(right) or not left:
            raise ShapeMismatch(
                f"{len(left)} left vs {len(right)} right frames")
        shape = left[0].data.shape
        for fb in left + right:
            if fb.data.shape != shape:
                raise ShapeMismatch(
                    f"frame {fb.data.shape} breaks pair shape {shape}")
        object.__setattr__(self, "left", left)
        object.__setattr__(self, "right", right)

    def __len__(self):
        return len(self.left)


def extract_stereo(fm) -> StereoPairSequence:
    """Left column 0 and right column V of the matrix, bit-unchanged.

    Warns when the right column still holds black disoccluded pixels,
    which means the matrix was never inpainted.
    """
    right_v = fm.n_views - 1
    frames_r = fm.frames[:, right_v]
    masks_r = fm.masks[:, right_v]
    hole = (masks_r == 0) & (frames_r == 0.0).all(axis=-1)
    if hole.any():
        warnings.warn(
            f"right column has {int(hole.sum())} uninpainted black pixels",
            UninpaintedMatrixWarning)
    left = tuple(FrameBuffer(fm.frames[s, 0]) for s in range(fm.n_frames))
    right = tuple(FrameBuffer(frames_r[s]) for s in range(fm.n_frames))
    return StereoPairSequence(left, right)


def compose_sbs(pair: StereoPairSequence):
    """Side-by-side frames: left|right, width doubled."""
    return [FrameBuffer(np.concatenate([lf.data, rf.data], axis=1))
            for lf, rf in zip(pair.left, pair.right)]


def compose_anaglyph(pair: StereoPairSequence):
    """Red-cyan frames: R channel from left, G and B from right."""
    if pair.left[0].channels != 3:
        raise ShapeMismatch("anaglyph needs 3-channel frames")
    out = []
    for lf, rf in zip(pair.left, pair.right):
        data = rf.data.copy()
        data[:, :, 0] = lf.data[:, :, 0]
        out.append(FrameBuffer(data))
    return out


def render_preview_grid(fm, rows=None, cols=None) -> FrameBuffer:
    """Tile selected (s, v) cells into one image with 2-px separators.

    Separators also border the outside, so a 1x1 selection is the frame
    plus a frame-wide border.  Tile (i, j) starts at
    (SEPARATOR_PX + i*(H + SEPARATOR_PX), SEPARATOR_PX + j*(W + SEPARATOR_PX)).
    """
    rows = list(range(fm.n_frames)) if rows is None else list(rows)
    cols = list(range(fm.n_views)) if cols is None else list(cols)
    h, w, c = fm.frames.shape[2:]
    sep = SEPARATOR_PX
    out = np.full((len(rows) * (h + sep) + sep, len(cols) * (w + sep) + sep,
                   c), SEPARATOR_VALUE, dtype=np.float32)
    for i, s in enumerate(rows):
        for j, v in enumerate(cols):
            y = sep + i * (h + sep)
            x = sep + j * (w + sep)
            out[y:y + h, x:x + w] = fm.frames[s, v]
    return FrameBuffer(out)


def save_outputs(pair: StereoPairSequence, outdir, formats=FORMATS,
                 bits: int = 8):
    """Write numbered PNG sequences under outdir/<format>/f###.png."""
    unknown = set(formats) - set(FORMATS)
    if unknown:
        raise ShapeMismatch(f"unknown output formats {sorted(unknown)}")
    streams = {}
    if "left" in formats:
        streams["left"] = pair.left
    if "right" in formats:
        streams["right"] = pair.right
    if "sbs" in formats:
        streams["sbs"] = compose_sbs(pair)
    if "anaglyph" in formats:
        streams["anaglyph"] = compose_anaglyph(pair)
    written = []
    for name, frames in streams.items():
        sub = os.path.join(outdir, name)
        os.makedirs(sub, exist_ok=True)
        for s, fb in enumerate(frames):
            path = os.path.join(sub, FRAME_PATTERN.format(s))
            write_frame(path, fb, bits=bits)
            written.append(path)
    return written
