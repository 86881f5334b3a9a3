"""CLI: export relation embeddings and word vectors.

Exit codes match the consumer's convention: 0 success, 1 usage error,
2 data or model error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .encoders import EncoderError
from .export import (ExportError, ExportManifest, export_relations,
                     export_word_vectors, load_pairs_tsv)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="relchain-export",
                     description="Produce relchain binary embedding artifacts")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("export-relations", help="pairs TSV -> RELC file")
    p.add_argument("--model", required=True,
                   help="model identifier, or hash:<dim> for the test encoder")
    p.add_argument("--pairs", required=True, help="2-column TSV of ordered pairs")
    p.add_argument("--out", required=True)
    p.add_argument("--batch", type=int, default=64)
    p.add_argument("--dim", type=int, default=1024,
                   help="expected embedding width (checked against the model)")
    p.add_argument("--device", default="cpu")

    p = sub.add_parser("export-vectors", help="text vector dump -> WVEC file")
    p.add_argument("--src", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--language", default="en",
                   help="language tag kept for /c/<lang>/ term rows")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        if args.command == "export-relations":
            dim = args.dim
            if args.model.startswith("hash:"):
                dim = int(args.model.split(":", 1)[1])
            manifest = ExportManifest(model=args.model,
                                      pairs=load_pairs_tsv(args.pairs),
                                      out=args.out, batch_size=args.batch, dim=dim)
            stats = export_relations(manifest)
            print(f"wrote {stats.written} records to {args.out} "
                  f"({len(stats.skipped)} skipped, {stats.duplicates} duplicates)")
            return 0
        if args.command == "export-vectors":
            stats = export_word_vectors(args.src, args.out, language=args.language)
            print(f"wrote {stats.written} vectors to {args.out} "
                  f"({len(stats.skipped)} skipped, {stats.duplicates} duplicates)")
            return 0
        raise AssertionError(args.command)
    except (ExportError, EncoderError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
