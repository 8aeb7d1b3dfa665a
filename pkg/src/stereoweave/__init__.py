"""stereoweave: stereoscopic video synthesis by warp, frame-matrix
construction, and diffusion-based inpainting of disoccluded regions."""

__version__ = "0.1.0"

from .errors import (
    FileFormatError,
    InvariantError,
    ProtocolError,
    StereoweaveError,
)

__all__ = [
    "__version__",
    "StereoweaveError",
    "InvariantError",
    "FileFormatError",
    "ProtocolError",
]
