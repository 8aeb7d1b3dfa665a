"""Diffusion-based inpainting: schedule, codecs, endpoints, samplers."""

from .schedule import NoiseSchedule, make_schedule
from .codec import AvgPoolCodec, IdentityCodec, LatentCodec, downsample_mask
from .endpoint import DenoiserEndpoint, OracleDenoiser, ZeroDenoiser
from .sampler import (
    boundary_reinject,
    combine_masked,
    denoise_step,
    inpaint_frame_matrix,
    inpaint_sequence,
    resample_noise,
    sample_known,
)

__all__ = [
    "NoiseSchedule",
    "make_schedule",
    "LatentCodec",
    "IdentityCodec",
    "AvgPoolCodec",
    "downsample_mask",
    "DenoiserEndpoint",
    "OracleDenoiser",
    "ZeroDenoiser",
    "sample_known",
    "denoise_step",
    "combine_masked",
    "resample_noise",
    "inpaint_sequence",
    "inpaint_frame_matrix",
    "boundary_reinject",
]
