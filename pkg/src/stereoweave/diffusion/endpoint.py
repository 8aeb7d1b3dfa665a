"""Denoiser endpoints: the predict interface and local test doubles.

An endpoint maps a latent sequence (n, C, h, w) at timestep t plus a
text condition to (eps, var) of the same shape.  `tag` identifies which
matrix sequence is being denoised (("col", v) or ("row", s)); transports
ignore it, test doubles use it to pick targets and record call logs.
"""

import numpy as np

from ..errors import ShapeMismatch

CAP_SERIALIZED = "serialized"
CAP_CONCURRENT = "concurrent"


class DenoiserEndpoint:
    """Interface; implementations may be local or remote."""

    capability = CAP_SERIALIZED

    def predict(self, z_seq: np.ndarray, cond: str, t: int, *, tag=None):
        raise NotImplementedError

    def close(self):
        pass


class OracleDenoiser(DenoiserEndpoint):
    """Predicts the exact noise between z_t and a fixed clean target.

    eps_hat = (z_t - sqrt(abar_t) * target) / sqrt(1 - abar_t), var = 0.
    With deterministic stepping the DDPM recursion then reproduces the
    target exactly at t = 0.  Targets are selected by tag when a mapping
    is given, else the single default target is used.
    """

    capability = CAP_CONCURRENT

    def __init__(self, sched, target=None, targets_by_tag=None):
        self.sched = sched
        self.target = None if target is None else np.asarray(
            target, dtype=np.float32)
        self.targets_by_tag = targets_by_tag or {}
        self.calls = []

    def _target_for(self, tag, shape):
        if tag in self.targets_by_tag:
            return np.asarray(self.targets_by_tag[tag], dtype=np.float32)
        if self.target is None:
            raise ShapeMismatch(f"no oracle target for tag {tag!r}")
        return self.target

    def predict(self, z_seq, cond, t, *, tag=None):
        z_seq = np.asarray(z_seq, dtype=np.float32)
        target = self._target_for(tag, z_seq.shape)
        if target.shape != z_seq.shape:
            raise ShapeMismatch(
                f"target {target.shape} vs latents {z_seq.shape}")
        self.calls.append((int(t), tag))
        ab = self.sched.abar(int(t))
        sq_ab = np.float32(np.sqrt(ab))
        sq_1m = np.float32(np.sqrt(1.0 - ab))
        if sq_1m == 0:
            eps = np.zeros_like(z_seq)
        else:
            eps = (z_seq - sq_ab * target) / sq_1m
        return eps.astype(np.float32), np.zeros_like(z_seq)


class ZeroDenoiser(DenoiserEndpoint):
    """Always predicts zero noise and zero variance; records calls."""

    capability = CAP_CONCURRENT

    def __init__(self):
        self.calls = []

    def predict(self, z_seq, cond, t, *, tag=None):
        z_seq = np.asarray(z_seq, dtype=np.float32)
        self.calls.append((int(t), tag))
        return np.zeros_like(z_seq), np.zeros_like(z_seq)
