"""Operator command line: batch processing, API serving, report export.

Exit codes: 0 success, 1 completed with per-image failures, 2 usage or
configuration error.
"""

from __future__ import annotations

import argparse
import os
import socket
import sys
from pathlib import Path

from .config import ConfigError, load_runtime_config

DATA_ROOT_ENV = "ROADATLAS_DATA_ROOT"


def _resolve_data_root(args) -> Path:
    root = args.data_root or os.environ.get(DATA_ROOT_ENV)
    if not root:
        raise ConfigError(f"no data root: pass --data-root or set {DATA_ROOT_ENV}")
    return Path(root)


def cmd_process(args) -> int:
    from .datastore import Datastore
    from .runner import find_images, process_files

    runtime = load_runtime_config(args.config)
    input_dir = Path(args.input)
    if not input_dir.is_dir():
        print(f"error: input directory not found: {input_dir}", file=sys.stderr)
        return 2
    store = Datastore(_resolve_data_root(args))
    summary = process_files(
        find_images(input_dir),
        store,
        runtime.pipeline,
        default_geo=runtime.default_geo,
        jobs=args.jobs,
        skip_processed=args.skip_processed,
    )
    print(summary.summary_line)
    return 0 if not summary.failures else 1


def cmd_serve(args) -> int:
    import uvicorn

    from .api import create_app

    runtime = load_runtime_config(args.config)
    data_root = _resolve_data_root(args)
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((args.host, args.port))
    except OSError as exc:
        print(f"error: cannot bind {args.host}:{args.port}: {exc}", file=sys.stderr)
        return 2
    finally:
        probe.close()
    app = create_app(data_root, runtime)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_export(args) -> int:
    from .datastore import Datastore

    data_root = _resolve_data_root(args)
    if not data_root.is_dir():
        print(f"error: data root not found: {data_root}", file=sys.stderr)
        return 2
    store = Datastore(data_root)
    body = store.export_report(args.format, validated_only=args.validated_only)
    Path(args.out).write_bytes(body)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="roadatlas",
        description="Road defect and road-marking asset management",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("process", help="process an image folder offline")
    p.add_argument("--input", required=True, help="directory of images (+ optional geo sidecars)")
    p.add_argument("--data-root", default=None, help=f"data root (or ${DATA_ROOT_ENV})")
    p.add_argument("--config", required=True, help="pipeline configuration file")
    p.add_argument("--jobs", type=int, default=1, help="worker pool size")
    p.add_argument(
        "--skip-processed",
        action="store_true",
        help="skip images already processed into this data root",
    )
    p.set_defaults(func=cmd_process)

    p = sub.add_parser("serve", help="serve the HTTP API")
    p.add_argument("--data-root", default=None, help=f"data root (or ${DATA_ROOT_ENV})")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--config", required=True, help="pipeline configuration file")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("export", help="export the defect report")
    p.add_argument("--data-root", default=None, help=f"data root (or ${DATA_ROOT_ENV})")
    p.add_argument("--format", required=True, choices=["csv", "json"])
    p.add_argument("--validated-only", action="store_true")
    p.add_argument("--out", required=True, help="output file path")
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
