"""Command-line entry point: extract a representation store from a checkpoint."""
from __future__ import annotations

import argparse
import sys

from .errors import ExtractionError, ModelLoadError
from .extract import ExtractionJob, extract


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repextract",
        description="Dump per-layer hidden states and attention tensors of a "
                    "frozen transformer checkpoint into a representation store.")
    parser.add_argument("--model", required=True,
                        help="checkpoint identifier or local path")
    parser.add_argument("--corpus", required=True,
                        help="directory of source files to extract")
    parser.add_argument("--out", required=True,
                        help="store output directory (must be empty)")
    parser.add_argument("--max-len", type=int, default=512,
                        help="skip sources longer than this many tokens")
    parser.add_argument("--device", default="cpu",
                        help="torch device tag (default: cpu)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    job = ExtractionJob(model=args.model, corpus=args.corpus, out=args.out,
                        max_len=args.max_len, device=args.device)
    try:
        result = extract(job)
    except (ModelLoadError, ExtractionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for source_id, reason in result.skipped:
        print(f"skipped {source_id}: {reason}", file=sys.stderr)
    print(f"extracted {len(result.extracted)} sources to {result.root} "
          f"({len(result.skipped)} skipped)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
