"""Prediction models the bridge can serve.

Built-ins cover protocol work without weights: echo returns the request
tensor unchanged (round-trip fidelity checks), zero returns zeros for
both outputs. Real checkpoints plug in behind the same predict() shape
contract; the adapter is optional at install time.
"""

import numpy as np


class BadRequest(Exception):
    """Request decoded fine but the model cannot serve it."""


class EchoModel:
    """eps = first request tensor, var = 0; proves lossless transport."""

    name = "echo"

    def predict(self, t, cond, tensors):
        if not tensors:
            raise BadRequest("echo model needs at least one tensor")
        z = tensors[0]
        return z, np.zeros_like(z)


class ZeroModel:
    """eps = var = 0 with the request tensor's shape."""

    name = "zero"

    def predict(self, t, cond, tensors):
        if not tensors:
            raise BadRequest("zero model needs at least one tensor")
        z = np.zeros_like(tensors[0])
        return z, np.zeros_like(z)


class CheckpointAdapter:
    """Placeholder for serving a real latent video-diffusion checkpoint.

    Kept import-light: constructing it without the heavy optional
    dependencies installed fails with instructions, and the built-in
    models stay usable on a bare install.
    """

    name = "checkpoint"

    def __init__(self, spec):
        raise RuntimeError(
            f"checkpoint model {spec!r} needs the optional inference "
            "dependencies (torch + diffusers); install them and provide "
            "an adapter mapping the client's timestep to the model's "
            "trained schedule")


def load_model(name: str):
    if name == "echo":
        return EchoModel()
    if name == "zero":
        return ZeroModel()
    if name.startswith("checkpoint:"):
        return CheckpointAdapter(name.split(":", 1)[1])
    raise ValueError(f"unknown model {name!r}; "
                     "expected echo, zero, or checkpoint:<id>")
