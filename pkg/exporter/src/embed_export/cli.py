"""Command line: export a JSONL text file through a transformer encoder.

Exit codes: 0 success, 1 input/validation error, 2 internal error.
"""

from __future__ import annotations

import argparse
import sys
import traceback

from .errors import ExportError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embed-export", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="embed documents and write a corpus file")
    p.add_argument("--input", required=True, help='JSON-lines file of {"id", "text"} records')
    p.add_argument("--encoder", required=True, help="model name or local checkpoint directory")
    p.add_argument("--out", required=True, help="corpus file to write")
    p.add_argument("--format", choices=["binary", "json"], default="binary")
    p.add_argument("--pooled", action="store_true",
                   help="write one mean-pooled vector per document instead of token vectors")
    p.add_argument("--keep-special-tokens", action="store_true",
                   help="keep sequence-delimiter tokens in the export")
    p.add_argument("--batch", type=int, default=8, help="inference batch size")
    return parser


def cmd_export(args: argparse.Namespace) -> int:
    from .encoder import load_encoder
    from .export import export, read_texts

    texts = read_texts(args.input)
    encoder = load_encoder(args.encoder)
    manifest = export(
        texts,
        encoder,
        args.encoder,
        args.out,
        args.format,
        pooled=args.pooled,
        keep_special_tokens=args.keep_special_tokens,
        batch_size=args.batch,
    )
    print(
        f"exported {manifest.doc_count} documents, {manifest.total_tokens} tokens, "
        f"dim={manifest.dim}"
        + (f", skipped {len(manifest.skipped_doc_ids)}" if manifest.skipped_doc_ids else "")
    )
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return cmd_export(args)
    except (ExportError, ValueError, OSError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
