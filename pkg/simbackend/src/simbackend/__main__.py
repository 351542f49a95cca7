"""Command-line entry point: run the scoring service."""

from __future__ import annotations

import argparse
import os

import uvicorn

from .app import create_app


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="simbackend", description="Sentence-similarity scoring service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument(
        "--port",
        type=int,
        default=int(os.environ.get("SIMBACKEND_PORT", "8100")),
        help="listen port (env: SIMBACKEND_PORT)",
    )
    parser.add_argument(
        "--mode",
        choices=["stub", "embedding"],
        default=os.environ.get("SIMBACKEND_MODE", "embedding"),
        help="scoring mode (env: SIMBACKEND_MODE)",
    )
    args = parser.parse_args(argv)
    uvicorn.run(create_app(args.mode), host=args.host, port=args.port)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
