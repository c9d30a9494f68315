"""Corpus file writers.

The formats here are the contract between this exporter and any consumer;
they are written from this package's own code on purpose so the two sides
stay honest about the byte layout.

Binary corpus format (little-endian throughout):

    magic   4 bytes  b"SDNA"
    version u32      1
    doc_count u32
    per document:
        id_len   u32,  then id_len bytes of UTF-8 doc id
        n_tokens u32
        dim      u32
        values   n_tokens*dim f32, row-major
        has_tokens u8 (0 or 1)
        if has_tokens: per token -> len u32, then UTF-8 bytes

JSON corpus format: an array of objects
    {"id": str, "dim": int, "embeddings": [[...], ...], "tokens": optional [str]}
"""

from __future__ import annotations

import io
import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ExportError

MAGIC = b"SDNA"
FORMAT_VERSION = 1


@dataclass(frozen=True, eq=False)
class ExportedDocument:
    doc_id: str
    values: np.ndarray  # (n_tokens, dim) float32
    tokens: tuple[str, ...] | None = None

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float32)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ExportError(f"doc={self.doc_id}: need a (n_tokens, dim) matrix, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ExportError(f"doc={self.doc_id}: non-finite embedding value")
        norms = np.linalg.norm(values.astype(np.float64), axis=1)
        if np.any(norms == 0.0):
            row = int(np.argmax(norms == 0.0))
            raise ExportError(f"doc={self.doc_id}: zero-norm embedding row={row}")
        object.__setattr__(self, "values", values)
        if self.tokens is not None and len(self.tokens) != values.shape[0]:
            raise ExportError(
                f"doc={self.doc_id}: {len(self.tokens)} token strings for {values.shape[0]} rows"
            )

    @property
    def n_tokens(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


def _atomic_write(path: str | Path, blob: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _dump_binary(docs: list[ExportedDocument]) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", FORMAT_VERSION, len(docs)))
    for doc in docs:
        ident = doc.doc_id.encode("utf-8")
        buf.write(struct.pack("<I", len(ident)))
        buf.write(ident)
        buf.write(struct.pack("<II", doc.n_tokens, doc.dim))
        buf.write(np.ascontiguousarray(doc.values, dtype="<f4").tobytes())
        buf.write(struct.pack("<B", 1 if doc.tokens is not None else 0))
        if doc.tokens is not None:
            for tok in doc.tokens:
                enc = tok.encode("utf-8")
                buf.write(struct.pack("<I", len(enc)))
                buf.write(enc)
    return buf.getvalue()


def _dump_json(docs: list[ExportedDocument]) -> str:
    entries = []
    for doc in docs:
        entry: dict = {
            "id": doc.doc_id,
            "dim": doc.dim,
            "embeddings": [[float(x) for x in row] for row in doc.values],
        }
        if doc.tokens is not None:
            entry["tokens"] = list(doc.tokens)
        entries.append(entry)
    return json.dumps(entries, indent=1)


def write_corpus(docs: list[ExportedDocument], path: str | Path, format: str = "binary") -> None:
    seen: set[str] = set()
    for doc in docs:
        if doc.doc_id in seen:
            raise ExportError(f"doc={doc.doc_id} appears more than once")
        seen.add(doc.doc_id)
    if format == "binary":
        _atomic_write(path, _dump_binary(docs))
    elif format == "json":
        _atomic_write(path, _dump_json(docs).encode("utf-8"))
    else:
        raise ValueError(f"unknown corpus format {format!r}")


def write_manifest(path: str | Path, manifest: dict) -> None:
    _atomic_write(path, (json.dumps(manifest, indent=1) + "\n").encode("utf-8"))
