"""External denoiser wire protocol: framing codec and stream client.

Frame = magic "SVDN" | version:u32 | msg_type:u32 | payload_len:u64 |
payload, every integer little-endian.  A predict request carries
(t, cond, tensors); the response carries exactly two tensors (eps, var)
shaped like the request; an error frame carries code + UTF-8 message.
One request is in flight per connection.
"""

import shlex
import socket
import struct
import subprocess

import numpy as np

from .diffusion.endpoint import CAP_SERIALIZED, DenoiserEndpoint
from .errors import ProtocolError

MAGIC = b"SVDN"
VERSION = 1

MSG_PREDICT_REQ = 1
MSG_PREDICT_RESP = 2
MSG_ERROR = 3

ERR_BAD_MAGIC = 1
ERR_BAD_VERSION = 2
ERR_BAD_TYPE = 3
ERR_BAD_PAYLOAD = 4

_HEADER = struct.Struct("<4sIIQ")
_U32 = struct.Struct("<I")
MAX_NDIM = 8


def encode_frame(msg_type: int, payload: bytes) -> bytes:
    return _HEADER.pack(MAGIC, VERSION, msg_type, len(payload)) + payload


def read_exact(read, n: int) -> bytes:
    """Drain exactly n bytes from read(k) (returns b'' at EOF)."""
    chunks = []
    need = n
    while need:
        chunk = read(need)
        if not chunk:
            raise ProtocolError(f"stream ended {need} bytes short")
        chunks.append(chunk)
        need -= len(chunk)
    return b"".join(chunks)


def read_frame(read):
    """Parse one frame from a byte stream; returns (msg_type, payload)."""
    header = read_exact(read, _HEADER.size)
    magic, version, msg_type, length = _HEADER.unpack(header)
    if magic != MAGIC:
        raise ProtocolError(f"bad magic {magic!r}")
    if version != VERSION:
        raise ProtocolError(f"unsupported version {version}")
    if msg_type not in (MSG_PREDICT_REQ, MSG_PREDICT_RESP, MSG_ERROR):
        raise ProtocolError(f"unknown message type {msg_type}")
    return msg_type, read_exact(read, length)


def encode_tensor(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr, dtype="<f4")
    head = struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape)
    return head + arr.tobytes()


def decode_tensor(payload: bytes, offset: int):
    """Returns (array, offset past the tensor)."""
    if offset + 4 > len(payload):
        raise ProtocolError("tensor header truncated")
    (ndim,) = _U32.unpack_from(payload, offset)
    offset += 4
    if ndim > MAX_NDIM:
        raise ProtocolError(f"tensor rank {ndim} exceeds {MAX_NDIM}")
    if offset + 4 * ndim > len(payload):
        raise ProtocolError("tensor dims truncated")
    dims = struct.unpack_from(f"<{ndim}I", payload, offset)
    offset += 4 * ndim
    count = 1
    for d in dims:
        count *= d
    if offset + 4 * count > len(payload):
        raise ProtocolError("tensor data truncated")
    flat = np.frombuffer(payload, dtype="<f4", count=count, offset=offset)
    return np.array(flat, dtype=np.float32).reshape(dims), offset + 4 * count


def encode_predict_request(t: int, cond: str, tensors) -> bytes:
    raw = cond.encode("utf-8")
    parts = [struct.pack("<II", t, len(raw)), raw,
             _U32.pack(len(tensors))]
    parts.extend(encode_tensor(a) for a in tensors)
    return b"".join(parts)


def decode_predict_request(payload: bytes):
    """Returns (t, cond, [tensors])."""
    if len(payload) < 8:
        raise ProtocolError("request header truncated")
    t, cond_len = struct.unpack_from("<II", payload, 0)
    offset = 8
    if offset + cond_len > len(payload):
        raise ProtocolError("condition string truncated")
    try:
        cond = payload[offset:offset + cond_len].decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ProtocolError(f"condition is not UTF-8: {exc}") from exc
    offset += cond_len
    if offset + 4 > len(payload):
        raise ProtocolError("tensor count truncated")
    (ntensors,) = _U32.unpack_from(payload, offset)
    offset += 4
    tensors = []
    for _ in range(ntensors):
        arr, offset = decode_tensor(payload, offset)
        tensors.append(arr)
    if offset != len(payload):
        raise ProtocolError(f"{len(payload) - offset} trailing bytes")
    return t, cond, tensors


def encode_predict_response(eps: np.ndarray, var: np.ndarray) -> bytes:
    return encode_tensor(eps) + encode_tensor(var)


def decode_predict_response(payload: bytes):
    eps, offset = decode_tensor(payload, 0)
    var, offset = decode_tensor(payload, offset)
    if offset != len(payload):
        raise ProtocolError(f"{len(payload) - offset} trailing bytes")
    return eps, var


def encode_error(code: int, message: str) -> bytes:
    return _U32.pack(code) + message.encode("utf-8")


def decode_error(payload: bytes):
    if len(payload) < 4:
        raise ProtocolError("error payload truncated")
    (code,) = _U32.unpack_from(payload, 0)
    return code, payload[4:].decode("utf-8", errors="replace")


class _SocketStream:
    def __init__(self, sock):
        self._sock = sock

    def read(self, n):
        return self._sock.recv(n)

    def write(self, data):
        self._sock.sendall(data)

    def close(self):
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


class _ProcessStream:
    def __init__(self, argv):
        self._proc = subprocess.Popen(argv, stdin=subprocess.PIPE,
                                      stdout=subprocess.PIPE)

    def read(self, n):
        return self._proc.stdout.read(n)

    def write(self, data):
        self._proc.stdin.write(data)
        self._proc.stdin.flush()

    def close(self):
        self._proc.stdin.close()
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()


class ExternalDenoiser(DenoiserEndpoint):
    """Client endpoint forwarding predict calls over a byte stream.

    The latent sequence travels as a single tensor; the peer must answer
    every request with one predict-resp (or error) frame.  tags are
    client-side bookkeeping and never cross the wire.
    """

    capability = CAP_SERIALIZED

    def __init__(self, stream):
        self._stream = stream

    @classmethod
    def connect_tcp(cls, host: str, port: int, timeout: float = 10.0):
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise ProtocolError(f"cannot reach {host}:{port}: {exc}") from exc
        sock.settimeout(timeout)
        return cls(_SocketStream(sock))

    @classmethod
    def spawn(cls, argv):
        if isinstance(argv, str):
            argv = shlex.split(argv)
        return cls(_ProcessStream(argv))

    def predict(self, z_seq, cond, t, *, tag=None):
        z_seq = np.asarray(z_seq, dtype=np.float32)
        payload = encode_predict_request(int(t), cond, [z_seq])
        self._stream.write(encode_frame(MSG_PREDICT_REQ, payload))
        msg_type, resp = read_frame(self._stream.read)
        if msg_type == MSG_ERROR:
            code, message = decode_error(resp)
            raise ProtocolError(f"denoiser error {code}: {message}")
        if msg_type != MSG_PREDICT_RESP:
            raise ProtocolError(f"unexpected message type {msg_type}")
        eps, var = decode_predict_response(resp)
        if eps.shape != z_seq.shape or var.shape != z_seq.shape:
            raise ProtocolError(
                f"response shapes {eps.shape}/{var.shape} do not match "
                f"request {z_seq.shape}")
        return eps, var

    def close(self):
        self._stream.close()
