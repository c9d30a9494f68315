"""The export operation: JSONL text in, corpus file plus manifest out.

Documents that produce no token vectors (blank text, or nothing left
after dropping special tokens) are skipped with a warning and listed in
the manifest under ``skipped_doc_ids``; counts in the manifest describe
exactly what landed in the corpus file.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .encoder import Encoder
from .errors import ExportError
from .writer import FORMAT_VERSION, ExportedDocument, write_corpus, write_manifest


@dataclass(frozen=True)
class ExportManifest:
    encoder_name: str
    doc_count: int
    total_tokens: int
    dim: int
    created_at: str
    format_version: int
    skipped_doc_ids: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "encoder_name": self.encoder_name,
            "doc_count": self.doc_count,
            "total_tokens": self.total_tokens,
            "dim": self.dim,
            "created_at": self.created_at,
            "format_version": self.format_version,
            "skipped_doc_ids": list(self.skipped_doc_ids),
        }


def read_texts(path: str | Path) -> list[tuple[str, str]]:
    """Read JSON-lines {"id", "text"} records, preserving order."""
    pairs: list[tuple[str, str]] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ExportError(f"{path}:{lineno}: not valid JSON: {e}") from None
            if not isinstance(rec, dict) or "id" not in rec or "text" not in rec:
                raise ExportError(f'{path}:{lineno}: need an object with "id" and "text"')
            doc_id = str(rec["id"])
            if doc_id in seen:
                raise ExportError(f"{path}:{lineno}: duplicate id {doc_id!r}")
            seen.add(doc_id)
            pairs.append((doc_id, str(rec["text"])))
    if not pairs:
        raise ExportError(f"{path}: no documents")
    return pairs


def manifest_path_for(out_path: str | Path) -> Path:
    out_path = Path(out_path)
    return out_path.with_suffix("").parent / (out_path.with_suffix("").name + ".manifest.json")


def export(
    texts: list[tuple[str, str]],
    encoder: Encoder,
    encoder_name: str,
    out_path: str | Path,
    format: str = "binary",
    *,
    pooled: bool = False,
    keep_special_tokens: bool = False,
    batch_size: int = 8,
) -> ExportManifest:
    if batch_size < 1:
        raise ValueError(f"batch size must be >= 1, got {batch_size}")
    docs: list[ExportedDocument] = []
    skipped: list[str] = []
    for start in range(0, len(texts), batch_size):
        chunk = texts[start:start + batch_size]
        vectors = encoder.embed_batch(
            [doc_id for doc_id, _ in chunk],
            [text for _, text in chunk],
            keep_special_tokens=keep_special_tokens,
            pooled=pooled,
        )
        for dv in vectors:
            if dv.values.shape[0] == 0:
                print(f"warning: doc={dv.doc_id} has no token vectors, skipping", file=sys.stderr)
                skipped.append(dv.doc_id)
                continue
            docs.append(ExportedDocument(dv.doc_id, dv.values, dv.tokens))
    if not docs:
        raise ExportError("every document was skipped; nothing to write")
    write_corpus(docs, out_path, format)
    manifest = ExportManifest(
        encoder_name=encoder_name,
        doc_count=len(docs),
        total_tokens=sum(d.n_tokens for d in docs),
        dim=docs[0].dim,
        created_at=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        format_version=FORMAT_VERSION,
        skipped_doc_ids=tuple(skipped),
    )
    write_manifest(manifest_path_for(out_path), manifest.to_dict())
    return manifest
