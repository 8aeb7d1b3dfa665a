"""Denoiser bridge: serves eps/var predictions over the SVDN wire protocol.

The bridge is deliberately standalone; it shares only the wire format with
its clients, never code, so a conforming client of any origin can talk to
it. Ships two built-in models for protocol work (echo, zero) and a stub
adapter slot for real checkpoints.
"""

from .framing import (
    MAGIC,
    MSG_ERROR,
    MSG_PREDICT_REQ,
    MSG_PREDICT_RESP,
    VERSION,
    FramingError,
)
from .models import BadRequest, EchoModel, ZeroModel, load_model
from .server import handle_stream, serve_stdio, serve_tcp

__all__ = [
    "MAGIC",
    "VERSION",
    "MSG_PREDICT_REQ",
    "MSG_PREDICT_RESP",
    "MSG_ERROR",
    "FramingError",
    "BadRequest",
    "EchoModel",
    "ZeroModel",
    "load_model",
    "handle_stream",
    "serve_stdio",
    "serve_tcp",
]
