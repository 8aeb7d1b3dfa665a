"""Latent codecs and mask downsampling.

Latent sequences are float32 arrays shaped (n, C, h, w); pixel sequences
are (n, H, W, C) in [0, 1].  The identity codec is the exact reference
(down = 1, pure axis transpose); the average-pool codec mimics an 8x
VAE's information loss for tests and previews without a network.
"""

import numpy as np

from ..errors import InvalidRange, ShapeMismatch


class LatentCodec:
    """Interface: encode (n,H,W,C) -> (n,C,h,w), decode the reverse."""

    down = 1

    def encode(self, frames: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def decode(self, latents: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class IdentityCodec(LatentCodec):
    """Latents are the pixels, channels-first; decode(encode(x)) == x."""

    down = 1

    def encode(self, frames):
        frames = np.asarray(frames, dtype=np.float32)
        return np.ascontiguousarray(frames.transpose(0, 3, 1, 2))

    def decode(self, latents):
        latents = np.asarray(latents, dtype=np.float32)
        return np.ascontiguousarray(latents.transpose(0, 2, 3, 1))


class AvgPoolCodec(LatentCodec):
    """Block-mean encoder with nearest-neighbor decoder.

    Non-divisible extents are edge-padded before pooling, so the latent
    is (n, C, ceil(H/down), ceil(W/down)); decode crops back to (H, W).
    """

    def __init__(self, down: int = 8, out_hw=None):
        if down < 1:
            raise InvalidRange(f"down must be >= 1, got {down}")
        self.down = int(down)
        self._out_hw = tuple(out_hw) if out_hw is not None else None

    def encode(self, frames):
        frames = np.asarray(frames, dtype=np.float32)
        n, h, w, c = frames.shape
        d = self.down
        if self._out_hw is None:
            self._out_hw = (h, w)
        ph = (-h) % d
        pw = (-w) % d
        if ph or pw:
            frames = np.pad(frames, ((0, 0), (0, ph), (0, pw), (0, 0)),
                            mode="edge")
        hh, ww = (h + ph) // d, (w + pw) // d
        blocks = frames.reshape(n, hh, d, ww, d, c)
        pooled = blocks.mean(axis=(2, 4), dtype=np.float32)
        return np.ascontiguousarray(pooled.transpose(0, 3, 1, 2))

    def decode(self, latents):
        latents = np.asarray(latents, dtype=np.float32)
        d = self.down
        up = latents.repeat(d, axis=2).repeat(d, axis=3)
        h, w = self._out_hw or (up.shape[2], up.shape[3])
        return np.ascontiguousarray(up[:, :, :h, :w].transpose(0, 2, 3, 1))


def downsample_mask(mask: np.ndarray, down: int) -> np.ndarray:
    """Min-pool a pixel mask to latent resolution.

    A latent cell is known only when every covered pixel is known;
    partial border blocks ignore the out-of-image remainder.
    """
    if down < 1:
        raise InvalidRange(f"down must be >= 1, got {down}")
    mask = np.asarray(mask, dtype=np.uint8)
    if mask.ndim != 2:
        raise ShapeMismatch(f"mask must be 2-D, got shape {mask.shape}")
    if down == 1:
        return mask.copy()
    h, w = mask.shape
    ph = (-h) % down
    pw = (-w) % down
    if ph or pw:
        # pad with known so the remainder cannot veto a block
        mask = np.pad(mask, ((0, ph), (0, pw)), constant_values=1)
    hh, ww = mask.shape[0] // down, mask.shape[1] // down
    blocks = mask.reshape(hh, down, ww, down)
    return blocks.min(axis=(1, 3)).astype(np.uint8)
