"""Command-line entry: `embed-export texts|frames`."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .export import ExportError, ExportJob, export_frame_embeddings, export_text_embeddings


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-export",
        description="Write text or frame embeddings in the teaser pipeline's vector format.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("texts", "one vector per manifest text"),
        ("frames", "three seeded frame vectors per clip"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--manifest", required=True, help="tab-separated id<TAB>payload file")
        p.add_argument("--out", required=True, help="output embedding file")
        p.add_argument("--mode", choices=["mock", "real"], default="mock")
        p.add_argument("--model", default="sentence-transformers/all-mpnet-base-v2")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--dim", type=int, default=64, help="vector dim (mock mode)")
        p.add_argument("--batch-size", type=int, default=32)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    job = ExportJob(
        manifest=Path(args.manifest),
        output=Path(args.out),
        mode=args.mode,
        model=args.model,
        batch_size=args.batch_size,
        seed=args.seed,
        dim=args.dim,
    )
    try:
        if args.command == "texts":
            export_text_embeddings(job)
        else:
            export_frame_embeddings(job)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
