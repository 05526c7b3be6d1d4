"""Process entrypoint: serve the wire contract or build a checkpoint."""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

import uvicorn

from .app import create_app
from .checkpoint import DEFAULT_THRESHOLD, make_checkpoint
from .config import ServerConfig, ServerConfigError, load_server_config
from .models import ModelLoadError


def resolve_config(args: argparse.Namespace) -> ServerConfig:
    """Merge the JSON config file with CLI flags (flags win)."""
    return load_server_config(
        args.config,
        {
            "seg_checkpoint": args.seg_checkpoint,
            "inpaint_model_id": args.inpaint_model,
            "bind_address": args.bind,
            "max_side": args.max_side,
            "device": args.device,
        },
    )


def cmd_serve(args: argparse.Namespace) -> int:
    try:
        config = resolve_config(args)
        app = create_app(config)
    except (ServerConfigError, ModelLoadError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    host, port = config.host_port()
    uvicorn.run(app, host=host, port=port, log_level="info")
    return 0


def cmd_make_checkpoint(args: argparse.Namespace) -> int:
    path = make_checkpoint(args.out, threshold=args.threshold)
    print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="artifact-server",
        description="Serve segmentation and inpainting models over the pipeline wire contract.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    serve = subs.add_parser("serve", help="run the HTTP server")
    serve.add_argument("--config", help="JSON file with ServerConfig fields")
    serve.add_argument("--seg-checkpoint", help="TorchScript segmentation checkpoint")
    serve.add_argument("--inpaint-model", help="inpainting model id (telea, navier-stokes)")
    serve.add_argument("--bind", help="host:port to listen on")
    serve.add_argument("--max-side", type=int, help="resize requests larger than this")
    serve.add_argument("--device", help="torch device for segmentation")
    serve.set_defaults(func=cmd_serve)

    make = subs.add_parser(
        "make-checkpoint", help="write the reference high-frequency checkpoint"
    )
    make.add_argument("--out", required=True, help="destination .pt path")
    make.add_argument(
        "--threshold",
        type=float,
        default=DEFAULT_THRESHOLD,
        help="absolute-Laplacian decision threshold",
    )
    make.set_defaults(func=cmd_make_checkpoint)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
