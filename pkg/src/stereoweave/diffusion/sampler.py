"""Resampling denoisers for single sequences and the frame matrix.

All latents are float32 (seq, C, h, w) grids.  Each visited step t of
the schedule descends to its successor `next` with the effective jump
beta; a repetition is sample_known (known branch, drawn at the target
level) + denoise_step (unknown branch) + combine_masked, and noise is
added back after every repetition except the last so the final combine
actually descends.  RNG draws are keyed by (seed, purpose, t, n,
sequence), so serial and parallel execution are bit-identical.
"""

import numpy as np

from ..errors import InvalidRange, ShapeMismatch
from ..rng import INIT, KNOWN, RESAMPLE, STEP, stream
from .codec import downsample_mask
from .schedule import SCOPE_ALL


def sample_known(sched, z0_known, t: int, rng):
    """Noise the known latents to level t: sqrt(abar) z0 + sqrt(1-abar) eps.

    Call with the target level of the current transition; t = 0 returns
    z0_known bit-exactly (no draw is consumed).
    """
    z0_known = np.asarray(z0_known, dtype=np.float32)
    ab = sched.abar(t)
    if t == 0:
        return z0_known.copy()
    a = np.float32(np.sqrt(ab))
    b = np.float32(np.sqrt(1.0 - ab))
    eps = rng.standard_normal(z0_known.shape, dtype=np.float32)
    return a * z0_known + b * eps


def denoise_step(sched, z_seq, cond, t: int, endpoint, rng,
                 deterministic: bool = False, tag=None):
    """One strided DDPM transition of the unknown branch, t -> next(t).

    mu = (z - beta_eff / sqrt(1 - abar_t) * eps) / sqrt(1 - beta_eff);
    the endpoint's variance scales added noise unless deterministic.
    """
    z_seq = np.asarray(z_seq, dtype=np.float32)
    eps, var = endpoint.predict(z_seq, cond, t, tag=tag)
    eps = np.asarray(eps, dtype=np.float32)
    var = np.asarray(var, dtype=np.float32)
    if eps.shape != z_seq.shape or var.shape != z_seq.shape:
        raise ShapeMismatch(
            f"endpoint returned {eps.shape}/{var.shape} for {z_seq.shape}")
    if (var < 0).any():
        raise InvalidRange("endpoint variance must be non-negative")
    beff = sched.jump_beta(t)
    ab = sched.abar(t)
    coef = np.float32(beff / np.sqrt(1.0 - ab))
    mu = (z_seq - coef * eps) / np.float32(np.sqrt(1.0 - beff))
    if deterministic:
        return mu.astype(np.float32)
    noise = rng.standard_normal(z_seq.shape, dtype=np.float32)
    return (mu + np.sqrt(var) * noise).astype(np.float32)


def combine_masked(z_known, z_unknown, m):
    """Per-cell select: known where m = 1, unknown where m = 0.

    m is (h, w) or (seq, h, w) and broadcasts over channels; selection
    (not arithmetic) keeps known lanes bit-identical to z_known.
    """
    z_known = np.asarray(z_known, dtype=np.float32)
    z_unknown = np.asarray(z_unknown, dtype=np.float32)
    if z_known.shape != z_unknown.shape:
        raise ShapeMismatch(f"{z_known.shape} vs {z_unknown.shape}")
    m = np.asarray(m, dtype=bool)
    if m.shape == z_known.shape:
        sel = m
    elif m.shape == z_known.shape[:-3] + z_known.shape[-2:]:
        # insert the channel axis: (..., h, w) -> (..., 1, h, w)
        sel = np.expand_dims(m, axis=-3)
    elif m.shape == z_known.shape[-2:]:
        sel = m  # trailing-axis broadcast covers seq and channels
    else:
        raise ShapeMismatch(f"mask {m.shape} vs latents {z_known.shape}")
    return np.where(sel, z_known, z_unknown)


def resample_noise(sched, z_next, t: int, rng):
    """Renoise from next(t) back up to level t for another repetition.

    sqrt(1 - beta_eff) z + sqrt(beta_eff) eps with the jump beta of t.
    """
    z_next = np.asarray(z_next, dtype=np.float32)
    beff = sched.jump_beta(t)
    a = np.float32(np.sqrt(1.0 - beff))
    b = np.float32(np.sqrt(beff))
    eps = rng.standard_normal(z_next.shape, dtype=np.float32)
    return a * z_next + b * eps


def boundary_reinject(sched, z_seq, z0_known, x_warp, masks, codec, endpoint,
                      cond, t: int, tag=None):
    """Refresh the known latents from the current denoising estimate.

    The one-shot clean estimate z0_tilde = (z_t - sqrt(1-abar) eps) /
    sqrt(abar) is decoded, composited with the warped pixels in pixel
    space (masks at full resolution), and re-encoded.  This pulls
    plausible content into latent cells straddling the disocclusion
    boundary, which the min-pooled latent mask marks unknown.
    """
    z_seq = np.asarray(z_seq, dtype=np.float32)
    eps, _ = endpoint.predict(z_seq, cond, t, tag=tag)
    eps = np.asarray(eps, dtype=np.float32)
    if eps.shape != z_seq.shape:
        raise ShapeMismatch(f"endpoint returned {eps.shape} for {z_seq.shape}")
    ab = sched.abar(t)
    z0_tilde = (z_seq - np.float32(np.sqrt(1.0 - ab)) * eps) \
        / np.float32(np.sqrt(ab))
    x_tilde = codec.decode(z0_tilde)
    x_warp = np.asarray(x_warp, dtype=np.float32)
    if x_tilde.shape != x_warp.shape:
        raise ShapeMismatch(f"decoded {x_tilde.shape} vs warped {x_warp.shape}")
    sel = np.asarray(masks, dtype=bool)[:, :, :, None]
    composite = np.where(sel, x_warp, x_tilde)
    return codec.encode(composite)


def _latent_masks(masks, down):
    return np.stack([downsample_mask(m, down) for m in masks])


def inpaint_sequence(x_warp, masks, cond, codec, endpoint, sched,
                     seed: int = 0, deterministic: bool = True,
                     reinject: bool = False):
    """Inpaint one warped video (S, H, W, C) with masks (S, H, W).

    Runs the full resampling schedule on a single sequence and returns
    the decoded frames.  With an all-known mask the output is the codec
    round trip of the input (bit-exact for the identity codec).
    """
    x_warp = np.asarray(x_warp, dtype=np.float32)
    masks = np.asarray(masks, dtype=np.uint8)
    if x_warp.ndim != 4 or masks.shape != x_warp.shape[:3]:
        raise ShapeMismatch(f"frames {x_warp.shape} vs masks {masks.shape}")
    z0_known = codec.encode(x_warp)
    m_lat = _latent_masks(masks, codec.down)
    z = stream(seed, INIT, 0, 0).standard_normal(z0_known.shape,
                                                 dtype=np.float32)
    for t in sched.step_plan:
        t_next = sched.next_step(t)
        reps = sched.resamples(t)
        if reinject:
            z0_known = boundary_reinject(sched, z, z0_known, x_warp, masks,
                                         codec, endpoint, cond, t)
        for n in range(1, reps + 1):
            kn = sample_known(sched, z0_known, t_next,
                              stream(seed, KNOWN, t, n))
            un = denoise_step(sched, z, cond, t, endpoint,
                              stream(seed, STEP, t, n), deterministic)
            z = combine_masked(kn, un, m_lat)
            if n < reps:
                z = resample_noise(sched, z, t, stream(seed, RESAMPLE, t, n))
    return codec.decode(z)


def inpaint_frame_matrix(fm, codec, endpoint, sched, seed: int = 0,
                         deterministic: bool = True, reinject: bool = False):
    """Alternating row/column resampling inpainting over a frame matrix.

    Latents live on the (S+1, V+1) grid.  At each visited t, repetition
    n denoises every column (time sequences) when n is odd and every row
    (view sweeps) when n is even; right-only scope restricts every
    repetition to the rightmost column.  When `reinject` is set the
    known latents of in-scope non-reference columns are refreshed from
    the current estimate once per visited t.  Returns a new FrameMatrix:
    columns that completed the schedule are decoded from their final
    latents (all-known masks); columns frozen mid-schedule by right-only
    scope fall back to the codec round trip of their warped input and
    keep their masks.
    """
    from ..matrix import FrameMatrix

    s1, v1 = fm.n_frames, fm.n_views
    right = v1 - 1
    cond = fm.prompt
    x = fm.frames
    z0_known = None
    for v in range(v1):
        enc = codec.encode(x[:, v])
        if z0_known is None:
            z0_known = np.empty((s1, v1) + enc.shape[1:], dtype=np.float32)
        z0_known[:, v] = enc
    m_lat = np.stack([_latent_masks(fm.masks[:, v], codec.down)
                      for v in range(v1)], axis=1)
    z = np.empty_like(z0_known)
    for s in range(s1):
        for v in range(v1):
            z[s, v] = stream(seed, INIT, s, v).standard_normal(
                z0_known.shape[2:], dtype=np.float32)

    for t in sched.step_plan:
        t_next = sched.next_step(t)
        reps = sched.resamples(t)
        all_views = sched.scope(t) == SCOPE_ALL
        if reinject:
            cols = range(1, v1) if all_views else [right]
            for v in cols:
                z0_known[:, v] = boundary_reinject(
                    sched, z[:, v], z0_known[:, v], x[:, v], fm.masks[:, v],
                    codec, endpoint, cond, t, tag=("col", v))
        for n in range(1, reps + 1):
            if not all_views:
                passes = [("col", right)]
            elif n % 2 == 1:
                passes = [("col", v) for v in range(v1)]
            else:
                passes = [("row", s) for s in range(s1)]
            for axis, idx in passes:
                if axis == "col":
                    zs, zk, ml = z[:, idx], z0_known[:, idx], m_lat[:, idx]
                else:
                    zs, zk, ml = z[idx], z0_known[idx], m_lat[idx]
                ax = 0 if axis == "col" else 1
                kn = sample_known(sched, zk, t_next,
                                  stream(seed, KNOWN, t, n, ax, idx))
                un = denoise_step(sched, zs, cond, t, endpoint,
                                  stream(seed, STEP, t, n, ax, idx),
                                  deterministic, tag=(axis, idx))
                out = combine_masked(kn, un, ml)
                if axis == "col":
                    z[:, idx] = out
                else:
                    z[idx] = out
            if n < reps:
                cols = range(v1) if all_views else [right]
                for v in cols:
                    for s in range(s1):
                        z[s, v] = resample_noise(
                            sched, z[s, v], t,
                            stream(seed, RESAMPLE, t, n, s, v))

    finished_all = sched.scope(sched.step_plan[-1]) == SCOPE_ALL
    out_frames = np.empty_like(x)
    out_masks = fm.masks.copy()
    for v in range(v1):
        if finished_all or v == right:
            out_frames[:, v] = np.clip(codec.decode(z[:, v]), 0.0, 1.0)
            out_masks[:, v] = 1
        else:
            out_frames[:, v] = np.clip(codec.decode(z0_known[:, v]), 0.0, 1.0)
    return FrameMatrix(out_frames, out_masks, fm.trajectory, fm.prompt)
