# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels.

Mirrors reference.py operation for operation: same neighbor visit order,
same float32 arithmetic, same z-buffer tie rule, so outputs are
bit-identical to the numpy backend (the build disables FP contraction).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "native"

cdef float[9] GAUSS3_W = [1.0, 2.0, 1.0, 2.0, 4.0, 2.0, 1.0, 2.0, 1.0]
cdef int[9] OFF_Y = [-1, -1, -1, 0, 0, 0, 1, 1, 1]
cdef int[9] OFF_X = [-1, 0, 1, -1, 0, 1, -1, 0, 1]


def forward_splat(cnp.ndarray[cnp.float32_t, ndim=3] rgb,
                  cnp.ndarray[cnp.float32_t, ndim=2] depth,
                  cnp.ndarray[cnp.int32_t, ndim=2] tx,
                  cnp.ndarray[cnp.int32_t, ndim=2] ty,
                  cnp.ndarray[cnp.int32_t, ndim=2] plane_idx,
                  int n_planes):
    """Scatter pixels into per-plane images; nearest depth wins, first
    writer kept on exact ties (row-major source order)."""
    cdef Py_ssize_t h = rgb.shape[0]
    cdef Py_ssize_t w = rgb.shape[1]
    cdef Py_ssize_t c = rgb.shape[2]
    cdef cnp.ndarray[cnp.float32_t, ndim=4] planes = np.zeros(
        (n_planes, h, w, c), dtype=np.float32)
    cdef cnp.ndarray[cnp.uint8_t, ndim=3] masks = np.zeros(
        (n_planes, h, w), dtype=np.uint8)
    cdef cnp.ndarray[cnp.float32_t, ndim=3] zbuf = np.zeros(
        (n_planes, h, w), dtype=np.float32)
    cdef Py_ssize_t y, x, k, px, py, p
    cdef float d
    for y in range(h):
        for x in range(w):
            px = tx[y, x]
            py = ty[y, x]
            if px < 0 or px >= w or py < 0 or py >= h:
                continue
            p = plane_idx[y, x]
            d = depth[y, x]
            if masks[p, py, px] == 0 or d < zbuf[p, py, px]:
                for k in range(c):
                    planes[p, py, px, k] = rgb[y, x, k]
                zbuf[p, py, px] = d
                masks[p, py, px] = 1
    return planes, masks


def box3_sum(cnp.ndarray[cnp.uint8_t, ndim=2] mask):
    """3x3 neighbor count (self included), zero padding."""
    cdef Py_ssize_t h = mask.shape[0]
    cdef Py_ssize_t w = mask.shape[1]
    cdef cnp.ndarray[cnp.float32_t, ndim=2] out = np.zeros((h, w), dtype=np.float32)
    cdef Py_ssize_t y, x, k, ny, nx
    cdef float acc
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for k in range(9):
                ny = y + OFF_Y[k]
                nx = x + OFF_X[k]
                if 0 <= ny < h and 0 <= nx < w:
                    acc = acc + <float> mask[ny, nx]
            out[y, x] = acc
    return out


def gauss3_mask_sum(cnp.ndarray[cnp.uint8_t, ndim=2] mask):
    """3x3 Gaussian-weighted neighbor count, zero padding."""
    cdef Py_ssize_t h = mask.shape[0]
    cdef Py_ssize_t w = mask.shape[1]
    cdef cnp.ndarray[cnp.float32_t, ndim=2] out = np.zeros((h, w), dtype=np.float32)
    cdef Py_ssize_t y, x, k, ny, nx
    cdef float acc
    for y in range(h):
        for x in range(w):
            acc = 0.0
            for k in range(9):
                ny = y + OFF_Y[k]
                nx = x + OFF_X[k]
                if 0 <= ny < h and 0 <= nx < w:
                    acc = acc + GAUSS3_W[k] * <float> mask[ny, nx]
            out[y, x] = acc
    return out


def gauss3_masked_values(cnp.ndarray[cnp.float32_t, ndim=3] values,
                         cnp.ndarray[cnp.uint8_t, ndim=2] mask):
    """Gaussian-weighted sum of valid neighbor values, zero padding."""
    cdef Py_ssize_t h = values.shape[0]
    cdef Py_ssize_t w = values.shape[1]
    cdef Py_ssize_t c = values.shape[2]
    cdef cnp.ndarray[cnp.float32_t, ndim=3] out = np.zeros((h, w, c), dtype=np.float32)
    cdef Py_ssize_t y, x, k, ch, ny, nx
    cdef float acc
    # channel innermost: the 9 neighbors are read as contiguous 3-vectors
    for y in range(h):
        for x in range(w):
            for ch in range(c):
                acc = 0.0
                for k in range(9):
                    ny = y + OFF_Y[k]
                    nx = x + OFF_X[k]
                    if 0 <= ny < h and 0 <= nx < w:
                        if mask[ny, nx] != 0:
                            acc = acc + GAUSS3_W[k] * values[ny, nx, ch]
                out[y, x, ch] = acc
    return out


def bilinear_sample(cnp.ndarray[cnp.float32_t, ndim=2] field,
                    cnp.ndarray[cnp.float32_t, ndim=2] xs,
                    cnp.ndarray[cnp.float32_t, ndim=2] ys):
    """Bilinear sample at float coordinates; out-of-range points are
    flagged invalid and return 0."""
    cdef Py_ssize_t h = field.shape[0]
    cdef Py_ssize_t w = field.shape[1]
    cdef Py_ssize_t oh = xs.shape[0]
    cdef Py_ssize_t ow = xs.shape[1]
    cdef cnp.ndarray[cnp.float32_t, ndim=2] out = np.zeros((oh, ow), dtype=np.float32)
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] valid = np.zeros((oh, ow), dtype=np.uint8)
    cdef Py_ssize_t y, x, x0, y0, x1, y1
    cdef float fx, fy, sx, sy, top, bot
    cdef float one = 1.0
    for y in range(oh):
        for x in range(ow):
            sx = xs[y, x]
            sy = ys[y, x]
            if sx < 0.0 or sx > <float> (w - 1) or sy < 0.0 or sy > <float> (h - 1):
                continue
            x0 = <Py_ssize_t> sx
            y0 = <Py_ssize_t> sy
            if w > 1 and x0 > w - 2:
                x0 = w - 2
            if h > 1 and y0 > h - 2:
                y0 = h - 2
            fx = sx - <float> x0
            fy = sy - <float> y0
            x1 = x0 + 1 if x0 + 1 < w else w - 1
            y1 = y0 + 1 if y0 + 1 < h else h - 1
            # all-float expressions (no double literals) keep each op in
            # float32 so results match the numpy backend bitwise
            top = (one - fx) * field[y0, x0] + fx * field[y0, x1]
            bot = (one - fx) * field[y1, x0] + fx * field[y1, x1]
            out[y, x] = (one - fy) * top + fy * bot
            valid[y, x] = 1
    return out, valid
