"""CLI entry: pick a transport and a model, then serve until EOF/kill."""

import argparse
import sys

from .models import load_model
from .server import serve_stdio, serve_tcp


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="svdn-bridge",
        description="denoiser service speaking the SVDN tensor protocol")
    ap.add_argument("--transport", choices=("stdio", "tcp"),
                    default="stdio")
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=0,
                    help="0 binds an ephemeral port; the bound port is "
                         "printed as 'listening <port>'")
    ap.add_argument("--model", default="echo",
                    help="echo | zero | checkpoint:<id>")
    args = ap.parse_args(argv)

    try:
        model = load_model(args.model)
    except (ValueError, RuntimeError) as exc:
        print(exc, file=sys.stderr)
        return 2

    try:
        if args.transport == "stdio":
            serve_stdio(model)
        else:
            serve_tcp(model, args.host, args.port)
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
