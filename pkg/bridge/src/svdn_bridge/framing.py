"""SVDN wire format: length-prefixed tensor frames over a byte stream.

Frame layout (all integers little-endian):

    magic "SVDN" | version u32 = 1 | msg_type u32 | payload_len u64 | payload

msg_type 1 is a predict request: t u32, cond_len u32, cond UTF-8 bytes,
ntensors u32, then each tensor as ndim u32, dims u32[ndim], float32 data.
msg_type 2 is the response carrying exactly two tensors (eps, var) whose
shapes equal the request's. msg_type 3 is an error: code u32 + UTF-8 text.

This module is self-contained on purpose: the bridge shares the wire
format with its clients, not code.
"""

import struct

import numpy as np

MAGIC = b"SVDN"
VERSION = 1
MSG_PREDICT_REQ = 1
MSG_PREDICT_RESP = 2
MSG_ERROR = 3

ERR_BAD_MAGIC = 1
ERR_BAD_VERSION = 2
ERR_BAD_TYPE = 3
ERR_BAD_PAYLOAD = 4
ERR_TOO_LARGE = 5

HEADER = struct.Struct("<4sIIQ")
MAX_NDIM = 8
# refuse to buffer absurd frames; fuzzed headers routinely claim 2**60 bytes
MAX_PAYLOAD = 64 * 1024 * 1024


class FramingError(Exception):
    """Malformed or truncated wire data."""

    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def encode_frame(msg_type, payload: bytes) -> bytes:
    return HEADER.pack(MAGIC, VERSION, msg_type, len(payload)) + payload


def read_exact(read, n):
    buf = b""
    while len(buf) < n:
        chunk = read(n - len(buf))
        if not chunk:
            if not buf and n > 0:
                return None  # clean EOF between frames
            raise FramingError(ERR_BAD_PAYLOAD,
                               f"stream ended {n - len(buf)} bytes short")
        buf += chunk
    return buf


def read_header(read):
    """Read and validate one frame header.

    Returns (msg_type, payload_len) or None on clean EOF.
    """
    raw = read_exact(read, HEADER.size)
    if raw is None:
        return None
    magic, version, msg_type, payload_len = HEADER.unpack(raw)
    if magic != MAGIC:
        raise FramingError(ERR_BAD_MAGIC, "bad magic")
    if version != VERSION:
        raise FramingError(ERR_BAD_VERSION, f"unsupported version {version}")
    if msg_type not in (MSG_PREDICT_REQ, MSG_PREDICT_RESP, MSG_ERROR):
        raise FramingError(ERR_BAD_TYPE, f"unknown message type {msg_type}")
    if payload_len > MAX_PAYLOAD:
        raise FramingError(ERR_TOO_LARGE,
                           f"payload of {payload_len} bytes refused")
    return msg_type, payload_len


def encode_tensor(arr) -> bytes:
    arr = np.ascontiguousarray(arr, dtype="<f4")
    head = struct.pack("<I", arr.ndim) \
        + struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + arr.tobytes()


def decode_tensor(payload: bytes, offset: int):
    if offset + 4 > len(payload):
        raise FramingError(ERR_BAD_PAYLOAD, "tensor header truncated")
    (ndim,) = struct.unpack_from("<I", payload, offset)
    offset += 4
    if ndim > MAX_NDIM:
        raise FramingError(ERR_BAD_PAYLOAD, f"tensor rank {ndim} refused")
    if offset + 4 * ndim > len(payload):
        raise FramingError(ERR_BAD_PAYLOAD, "tensor dims truncated")
    dims = struct.unpack_from(f"<{ndim}I", payload, offset)
    offset += 4 * ndim
    count = 1
    for d in dims:
        count *= d
    nbytes = count * 4
    if offset + nbytes > len(payload):
        raise FramingError(ERR_BAD_PAYLOAD, "tensor data truncated")
    arr = np.frombuffer(payload, dtype="<f4", count=count,
                        offset=offset).reshape(dims)
    return np.array(arr), offset + nbytes


def decode_predict_request(payload: bytes):
    """-> (t, cond, [tensors]); raises FramingError on any malformation."""
    if len(payload) < 8:
        raise FramingError(ERR_BAD_PAYLOAD, "request header truncated")
    t, cond_len = struct.unpack_from("<II", payload, 0)
    offset = 8
    if offset + cond_len > len(payload):
        raise FramingError(ERR_BAD_PAYLOAD, "condition text truncated")
    try:
        cond = payload[offset:offset + cond_len].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise FramingError(ERR_BAD_PAYLOAD, f"condition not UTF-8: {exc}")
    offset += cond_len
    if offset + 4 > len(payload):
        raise FramingError(ERR_BAD_PAYLOAD, "tensor count truncated")
    (ntensors,) = struct.unpack_from("<I", payload, offset)
    offset += 4
    tensors = []
    for _ in range(ntensors):
        arr, offset = decode_tensor(payload, offset)
        tensors.append(arr)
    if offset != len(payload):
        raise FramingError(ERR_BAD_PAYLOAD,
                           f"{len(payload) - offset} trailing bytes")
    return t, cond, tensors


def encode_predict_response(eps, var) -> bytes:
    return encode_frame(MSG_PREDICT_RESP,
                        encode_tensor(eps) + encode_tensor(var))


def encode_error(code, message: str) -> bytes:
    payload = struct.pack("<I", code) + message.encode("utf-8")
    return encode_frame(MSG_ERROR, payload)


def decode_error(payload: bytes):
    if len(payload) < 4:
        raise FramingError(ERR_BAD_PAYLOAD, "error payload truncated")
    (code,) = struct.unpack_from("<I", payload, 0)
    return code, payload[4:].decode("utf-8", errors="replace")
