"""Command line entry point: embed-service [--model-id ...] [--port ...] [--device cpu]."""

from __future__ import annotations

import argparse
import os
import sys

from .app import make_server
from .encoder import DEFAULT_MODEL, MODELS

_DEFAULT_PORT = 8763


def _resolve_port(flag_value: int | None) -> int:
    # explicit flag first, then the PORT environment override, then the default
    if flag_value is not None:
        return flag_value
    env = os.environ.get("PORT")
    if env is None:
        return _DEFAULT_PORT
    try:
        return int(env)
    except ValueError:
        raise SystemExit(f"embed-service: error: PORT environment variable is not an integer: {env!r}")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="embed-service",
        description="serve per-subword contextual states and word alignment maps over HTTP",
    )
    parser.add_argument("--model-id", default=DEFAULT_MODEL, choices=sorted(MODELS))
    parser.add_argument("--port", type=int, help=f"default: $PORT or {_DEFAULT_PORT}")
    parser.add_argument("--device", default="cpu", help="only cpu is available")
    args = parser.parse_args(argv)

    if args.device != "cpu":
        print(f"embed-service: error: device {args.device!r} is not available, use cpu", file=sys.stderr)
        return 2
    port = _resolve_port(args.port)

    server = make_server(model_id=args.model_id, port=port)
    host, bound = server.server_address[:2]
    print(f"{args.model_id} ready (d={server.encoder.d}) on http://{host}:{bound}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
