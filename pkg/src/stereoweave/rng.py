"""Splittable, counter-based random streams.

Every noise draw in the samplers is keyed by an explicit integer path
(seed, timestep, repetition, pass kind, sequence index, purpose), so the
drawn values never depend on execution order.  Serial and parallel runs of
the same configuration are therefore bit-identical.
"""

import numpy as np

# purpose codes used by the sampler paths
INIT = 0
KNOWN = 1
STEP = 2
RESAMPLE = 3


def stream(seed: int, *path: int) -> np.random.Generator:
    """Return an independent Philox generator for (seed, *path)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def normal_like(arr: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Standard-normal draw with arr's shape, always float32."""
    return rng.standard_normal(size=arr.shape, dtype=np.float32)
