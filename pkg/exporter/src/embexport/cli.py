"""Command line: embexport export --model <id> --corpus <jsonl> --out <file>."""

from __future__ import annotations

import argparse
import sys
from typing import Sequence

from .encoder import ModelLoadError
from .export import ExportError, ExportJob, export_embeddings


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embexport",
        description="Export sentence embeddings into an SCSE file.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    p = sub.add_parser("export", help="encode a corpus and write the embedding file")
    p.add_argument("--model", required=True, help='model id, e.g. "hash-256" or a sentence-transformers name')
    p.add_argument("--corpus", required=True, help="JSONL corpus with id and text fields")
    p.add_argument("--out", required=True, help="output .scse path")
    p.add_argument("--batch", type=int, default=64, help="inference batch size (default 64)")
    p.add_argument("--normalize", action="store_true", help="unit-normalize every row")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    job = None
    try:
        job = ExportJob(
            model_id=args.model,
            corpus_path=args.corpus,
            output_path=args.out,
            batch_size=args.batch,
            normalize=args.normalize,
        )
        count = export_embeddings(job)
    except (ExportError, ModelLoadError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {count} rows to {job.output_path}")
    return 0


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
