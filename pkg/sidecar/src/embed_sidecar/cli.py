"""Command line launcher for the embedding service."""

from __future__ import annotations

import argparse

from .config import DEFAULT_BIND, DEFAULT_MAX_BATCH, DEFAULT_MODEL, SidecarConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-sidecar",
        description="Serve contextual sentence embeddings over HTTP",
    )
    parser.add_argument(
        "--model", default=DEFAULT_MODEL, help="pretrained encoder identifier"
    )
    parser.add_argument("--bind", default=DEFAULT_BIND, help="host:port to listen on")
    parser.add_argument(
        "--max-batch",
        dest="max_batch",
        type=int,
        default=DEFAULT_MAX_BATCH,
        help="largest accepted texts list per request",
    )
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = SidecarConfig(model=args.model, bind=args.bind, max_batch=args.max_batch)
    except ValueError as exc:
        parser.error(str(exc))

    import uvicorn

    from .app import create_app

    uvicorn.run(create_app(config), host=config.host, port=config.port, log_level="info")
    return 0
