"""Serve a prediction model over stdio or TCP.

One request in flight per connection; every well-framed request gets
exactly one response frame, every malformed frame gets exactly one error
frame. After an error the connection closes: a bad header loses frame
sync, so continuing to read would misparse everything after it.
"""

import socket
import sys

from . import framing
from .models import BadRequest


def handle_stream(read, write, model):
    """Answer requests until EOF or the first malformed frame."""
    while True:
        try:
            head = framing.read_header(read)
            if head is None:
                return
            msg_type, payload_len = head
            payload = framing.read_exact(read, payload_len)
            if payload is None and payload_len > 0:
                return
            if msg_type != framing.MSG_PREDICT_REQ:
                raise framing.FramingError(
                    framing.ERR_BAD_TYPE,
                    f"expected a predict request, got type {msg_type}")
            t, cond, tensors = framing.decode_predict_request(payload or b"")
        except framing.FramingError as exc:
            try:
                write(framing.encode_error(exc.code, str(exc)))
            except OSError:
                pass
            return
        try:
            eps, var = model.predict(t, cond, tensors)
            reply = framing.encode_predict_response(eps, var)
        except BadRequest as exc:
            reply = framing.encode_error(framing.ERR_BAD_PAYLOAD, str(exc))
        except Exception as exc:  # the service must outlive model bugs
            reply = framing.encode_error(framing.ERR_BAD_PAYLOAD,
                                         f"model failure: {exc}")
        try:
            write(reply)
        except OSError:
            return


def serve_stdio(model):
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer

    def write(data):
        stdout.write(data)
        stdout.flush()

    handle_stream(stdin.read1 if hasattr(stdin, "read1") else stdin.read,
                  write, model)


def _drain(conn):
    # consume unread input before close so the peer sees FIN, not RST,
    # and can still collect a pending error frame
    conn.settimeout(1.0)
    try:
        while conn.recv(65536):
            pass
    except OSError:
        pass


def serve_tcp(model, host="127.0.0.1", port=0, on_listen=None):
    """Accept connections serially; each gets a fresh framing context."""
    with socket.socket(socket.AF_INET, socket.SOCK_STREAM) as srv:
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        srv.bind((host, port))
        srv.listen(8)
        bound = srv.getsockname()[1]
        print(f"listening {bound}", flush=True)
        if on_listen is not None:
            on_listen(bound)
        while True:
            conn, _ = srv.accept()
            with conn:
                try:
                    handle_stream(conn.recv, conn.sendall, model)
                    _drain(conn)
                except (ConnectionError, OSError):
                    pass
