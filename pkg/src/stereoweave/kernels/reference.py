"""Pure-numpy implementations of the per-pixel hot kernels.

This is the fallback backend used when the compiled extension is not
available, and the ground truth the native backend is tested against.
Both backends must produce bit-identical outputs: summation orders are
fixed, and no kernel re-derives values the caller already computed.
"""

import numpy as np

BACKEND = "python"

# 3x3 Gaussian weights, row-major; integer-valued so products with a binary
# mask are exact in float32 (normalization is applied by the caller).
GAUSS3_WEIGHTS = (1.0, 2.0, 1.0, 2.0, 4.0, 2.0, 1.0, 2.0, 1.0)
_OFFSETS = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 0), (0, 1), (1, -1), (1, 0), (1, 1))


def forward_splat(rgb, depth, tx, ty, plane_idx, n_planes):
    """Scatter source pixels into per-plane images with a z-buffer.

    rgb: (H, W, C) float32; depth: (H, W) float32; tx, ty: (H, W) int32
    precomputed integer target coordinates; plane_idx: (H, W) int32.
    Within a plane the strictly nearer pixel wins; on exactly equal depth
    the earlier pixel in row-major source order is kept.

    Returns (planes (N, H, W, C) float32, masks (N, H, W) uint8).
    """
    h, w, c = rgb.shape
    planes = np.zeros((n_planes, h, w, c), dtype=np.float32)
    masks = np.zeros((n_planes, h, w), dtype=np.uint8)

    tx = tx.ravel()
    ty = ty.ravel()
    inb = (tx >= 0) & (tx < w) & (ty >= 0) & (ty < h)
    src = np.flatnonzero(inb)
    if src.size == 0:
        return planes, masks
    tx = tx[src]
    ty = ty[src]
    d = depth.ravel()[src]
    p = plane_idx.ravel()[src]

    # Sort by target cell, then depth, then source order; the first entry of
    # each cell group is the winner (min depth, earliest source on ties).
    cell = (p.astype(np.int64) * h + ty) * w + tx
    order = np.lexsort((src, d, cell))
    cell = cell[order]
    first = np.ones(cell.size, dtype=bool)
    first[1:] = cell[1:] != cell[:-1]
    win = order[first]

    planes.reshape(-1, c)[cell[first]] = rgb.reshape(-1, c)[src[win]]
    masks.reshape(-1)[cell[first]] = 1
    return planes, masks


def box3_sum(mask):
    """Sum of the 3x3 neighborhood (self included) of a binary mask.

    Zero padding outside the image.  Returns float32 counts in 0..9.
    """
    m = mask.astype(np.float32)
    h, w = m.shape
    pad = np.zeros((h + 2, w + 2), dtype=np.float32)
    pad[1:-1, 1:-1] = m
    acc = np.zeros((h, w), dtype=np.float32)
    for dy, dx in _OFFSETS:
        acc = acc + pad[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
    return acc


def gauss3_mask_sum(mask):
    """3x3 Gaussian-weighted neighbor count of a binary mask (zero padding).

    Returns float32 values in 0..16 (weights 1-2-1 / 2-4-2 / 1-2-1).
    """
    m = mask.astype(np.float32)
    h, w = m.shape
    pad = np.zeros((h + 2, w + 2), dtype=np.float32)
    pad[1:-1, 1:-1] = m
    acc = np.zeros((h, w), dtype=np.float32)
    for wgt, (dy, dx) in zip(GAUSS3_WEIGHTS, _OFFSETS):
        acc = acc + np.float32(wgt) * pad[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
    return acc


def gauss3_masked_values(values, mask):
    """Gaussian-weighted sum of valid neighbors, per channel (zero padding).

    values: (H, W, C) float32; mask: (H, W) uint8.  Invalid neighbors
    contribute nothing; divide by gauss3_mask_sum to get the weighted mean.
    """
    h, w, c = values.shape
    mv = values * mask.astype(np.float32)[:, :, None]
    pad = np.zeros((h + 2, w + 2, c), dtype=np.float32)
    pad[1:-1, 1:-1] = mv
    acc = np.zeros((h, w, c), dtype=np.float32)
    for wgt, (dy, dx) in zip(GAUSS3_WEIGHTS, _OFFSETS):
        acc = acc + np.float32(wgt) * pad[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
    return acc


def bilinear_sample(field, xs, ys):
    """Bilinear sample of a single-channel field at float coordinates.

    Returns (values float32, valid uint8); valid is 0 wherever the sample
    point leaves [0, W-1] x [0, H-1] (the returned value is 0 there).
    """
    h, w = field.shape
    xs = xs.astype(np.float32, copy=False)
    ys = ys.astype(np.float32, copy=False)
    valid = (xs >= 0) & (xs <= np.float32(w - 1)) & (ys >= 0) & (ys <= np.float32(h - 1))

    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    # keep the 2x2 support inside the image at the far edges
    x0 = np.clip(x0, 0, w - 2) if w > 1 else np.zeros_like(x0)
    y0 = np.clip(y0, 0, h - 2) if h > 1 else np.zeros_like(y0)
    fx = xs - x0.astype(np.float32)
    fy = ys - y0.astype(np.float32)
    x0 = np.where(valid, x0, 0)
    y0 = np.where(valid, y0, 0)

    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    v00 = field[y0, x0]
    v01 = field[y0, x1]
    v10 = field[y1, x0]
    v11 = field[y1, x1]
    one = np.float32(1.0)
    top = (one - fx) * v00 + fx * v01
    bot = (one - fx) * v10 + fx * v11
    out = (one - fy) * top + fy * bot
    out = np.where(valid, out, np.float32(0.0)).astype(np.float32)
    return out, valid.astype(np.uint8)
