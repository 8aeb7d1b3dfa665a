"""Backend selection for the per-pixel hot kernels.

The compiled extension is preferred when importable; the numpy reference
implementation is the fallback and the correctness baseline.  Set
STEREOWEAVE_FORCE_PYTHON=1 to skip the extension (used by the tests to
compare backends and by the benchmark).
"""

import os

from . import reference

if os.environ.get("STEREOWEAVE_FORCE_PYTHON", "0") == "1":
    _impl = reference
else:
    try:
        from . import _native as _impl
    except ImportError:
        _impl = reference

BACKEND = _impl.BACKEND

forward_splat = _impl.forward_splat
box3_sum = _impl.box3_sum
gauss3_mask_sum = _impl.gauss3_mask_sum
gauss3_masked_values = _impl.gauss3_masked_values
bilinear_sample = _impl.bilinear_sample

__all__ = [
    "BACKEND",
    "forward_splat",
    "box3_sum",
    "gauss3_mask_sum",
    "gauss3_masked_values",
    "bilinear_sample",
    "reference",
]
