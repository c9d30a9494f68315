"""Corpus and power-trace file IO.

This module is the only place that touches embedding files; the numerics
modules consume validated in-memory types and never see a file format.

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

Power trace CSV: header ``doc_id,delta_t_s,watts``, one row per sample,
all rows of a document contiguous, delta_t_s constant within a document.

Values are stored as 32-bit floats in files; every reduction over them
(norms, means, sums) is accumulated in 64-bit floats.  Loading validates
and rejects; it never repairs data in place.
"""

from __future__ import annotations

import csv
import io
import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateDocId,
    MalformedHeader,
    MissingTrace,
    NegativePower,
    NonFiniteValue,
    NonUniformDeltaT,
    UnknownDocId,
    ZeroNormRow,
)

MAGIC = b"SDNA"
FORMAT_VERSION = 1

TRACE_HEADER = ["doc_id", "delta_t_s", "watts"]


# ---- domain types -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class EmbeddingMatrix:
    """Per-document token vectors, one row per token, float32.

    Rows are the document's semantic bases; all of them must be finite with
    strictly positive Euclidean norm.
    """

    values: np.ndarray
    tokens: tuple[str, ...] | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float32)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DimensionMismatch(
                f"embedding matrix must be 2-D with n_tokens >= 1 and dim >= 1, got shape {values.shape}"
            )
        values = np.ascontiguousarray(values)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if self.tokens is not None:
            tokens = tuple(self.tokens)
            if len(tokens) != values.shape[0]:
                raise DimensionMismatch(
                    f"{len(tokens)} token strings for {values.shape[0]} rows"
                )
            object.__setattr__(self, "tokens", tokens)
        _validate_rows(values)

    @property
    def n_tokens(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True, eq=False)
class CorpusDocument:
    """One document: a unique id plus its embedding matrix."""

    doc_id: str
    embeddings: EmbeddingMatrix

    @property
    def token_count(self) -> int:
        return self.embeddings.n_tokens


@dataclass(frozen=True, eq=False)
class PowerTrace:
    """Uniformly sampled instantaneous power (watts) for one document."""

    doc_id: str
    delta_t: float
    samples: np.ndarray

    def __post_init__(self):
        if not (self.delta_t > 0.0) or not np.isfinite(self.delta_t):
            raise NonUniformDeltaT(f"doc={self.doc_id}: delta_t must be > 0, got {self.delta_t}")
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < 1:
            raise MalformedHeader(f"doc={self.doc_id}: trace needs at least one sample")
        if not np.all(np.isfinite(samples)):
            raise NonFiniteValue(f"doc={self.doc_id}: non-finite power sample")
        if np.any(samples < 0.0):
            bad = int(np.argmax(samples < 0.0))
            raise NegativePower(f"doc={self.doc_id}: sample {bad} is {samples[bad]} W")
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)


def _validate_rows(values: np.ndarray, doc_id: str | None = None) -> None:
    ctx = f"doc={doc_id} " if doc_id else ""
    finite = np.isfinite(values)
    if not finite.all():
        row = int(np.where(~finite.all(axis=1))[0][0])
        raise NonFiniteValue(f"{ctx}row={row} contains a NaN or Inf")
    norms = np.linalg.norm(values.astype(np.float64), axis=1)
    if np.any(norms == 0.0):
        row = int(np.argmax(norms == 0.0))
        raise ZeroNormRow(f"{ctx}row={row} has zero Euclidean norm")


# ---- corpus loading / writing -----------------------------------------------

def load_corpus(path: str | Path, format: str = "binary") -> list[CorpusDocument]:
    """Load and validate a corpus file; raises rather than repairing bad data."""
    if format == "binary":
        docs = _load_binary(Path(path))
    elif format == "json":
        docs = _load_json(Path(path))
    else:
        raise ValueError(f"unknown corpus format {format!r}")
    seen: set[str] = set()
    for doc in docs:
        if doc.doc_id in seen:
            raise DuplicateDocId(f"doc={doc.doc_id} appears more than once")
        seen.add(doc.doc_id)
    return docs


def write_corpus(docs: list[CorpusDocument], path: str | Path, format: str = "binary") -> None:
    """Write a corpus; the binary form round-trips byte-identically through load_corpus."""
    if format == "binary":
        atomic_write_bytes(path, _dump_binary(docs))
    elif format == "json":
        atomic_write_text(path, _dump_json(docs))
    else:
        raise ValueError(f"unknown corpus format {format!r}")


class _Cursor:
    """Sequential reader over a bytes buffer that fails loudly on truncation."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise MalformedHeader(
                f"truncated file: wanted {n} bytes at offset {self.pos}, have {len(self.data) - self.pos}"
            )
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u8(self) -> int:
        return self.take(1)[0]

    def utf8(self, n: int) -> str:
        try:
            return self.take(n).decode("utf-8")
        except UnicodeDecodeError as e:
            raise MalformedHeader(f"invalid UTF-8 at offset {self.pos}: {e}") from None


def _load_binary(path: Path) -> list[CorpusDocument]:
    cur = _Cursor(path.read_bytes())
    if cur.take(4) != MAGIC:
        raise MalformedHeader(f"bad magic bytes in {path.name}, expected {MAGIC!r}")
    version = cur.u32()
    if version != FORMAT_VERSION:
        raise MalformedHeader(f"unsupported format version {version}")
    doc_count = cur.u32()
    docs = []
    for _ in range(doc_count):
        doc_id = cur.utf8(cur.u32())
        n_tokens = cur.u32()
        dim = cur.u32()
        if n_tokens < 1 or dim < 1:
            raise MalformedHeader(f"doc={doc_id}: n_tokens={n_tokens} dim={dim} must be >= 1")
        raw = cur.take(n_tokens * dim * 4)
        values = np.frombuffer(raw, dtype="<f4").reshape(n_tokens, dim)
        has_tokens = cur.u8()
        if has_tokens not in (0, 1):
            raise MalformedHeader(f"doc={doc_id}: has_tokens flag must be 0 or 1, got {has_tokens}")
        tokens = None
        if has_tokens:
            tokens = tuple(cur.utf8(cur.u32()) for _ in range(n_tokens))
        docs.append(_make_document(doc_id, values, tokens))
    if cur.pos != len(cur.data):
        raise MalformedHeader(f"{len(cur.data) - cur.pos} trailing bytes after last document")
    return docs


def _dump_binary(docs: list[CorpusDocument]) -> bytes:
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<II", FORMAT_VERSION, len(docs)))
    for doc in docs:
        ident = doc.doc_id.encode("utf-8")
        m = doc.embeddings
        buf.write(struct.pack("<I", len(ident)))
        buf.write(ident)
        buf.write(struct.pack("<II", m.n_tokens, m.dim))
        buf.write(np.ascontiguousarray(m.values, dtype="<f4").tobytes())
        buf.write(struct.pack("<B", 1 if m.tokens is not None else 0))
        if m.tokens is not None:
            for tok in m.tokens:
                enc = tok.encode("utf-8")
                buf.write(struct.pack("<I", len(enc)))
                buf.write(enc)
    return buf.getvalue()


def _load_json(path: Path) -> list[CorpusDocument]:
    try:
        entries = json.loads(path.read_text("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise MalformedHeader(f"{path.name} is not valid JSON: {e}") from None
    if not isinstance(entries, list):
        raise MalformedHeader("JSON corpus must be an array of documents")
    docs = []
    for entry in entries:
        if not isinstance(entry, dict) or "id" not in entry or "dim" not in entry or "embeddings" not in entry:
            raise MalformedHeader("each document needs 'id', 'dim' and 'embeddings'")
        doc_id = str(entry["id"])
        dim = int(entry["dim"])
        rows = entry["embeddings"]
        if not isinstance(rows, list) or not rows:
            raise MalformedHeader(f"doc={doc_id}: 'embeddings' must be a non-empty array")
        for i, row in enumerate(rows):
            if not isinstance(row, list) or len(row) != dim:
                raise DimensionMismatch(
                    f"doc={doc_id} row={i} has {len(row) if isinstance(row, list) else 'no'} values, declared dim={dim}"
                )
        try:
            values = np.asarray(rows, dtype=np.float64).astype(np.float32)
        except (TypeError, ValueError) as e:
            raise MalformedHeader(f"doc={doc_id}: non-numeric embedding value: {e}") from None
        tokens = entry.get("tokens")
        docs.append(_make_document(doc_id, values, tuple(tokens) if tokens is not None else None))
    return docs


def _dump_json(docs: list[CorpusDocument]) -> str:
    entries = []
    for doc in docs:
        entry: dict = {
            "id": doc.doc_id,
            "dim": doc.embeddings.dim,
            "embeddings": [[float(x) for x in row] for row in doc.embeddings.values],
        }
        if doc.embeddings.tokens is not None:
            entry["tokens"] = list(doc.embeddings.tokens)
        entries.append(entry)
    return json.dumps(entries, indent=1) + "\n"


def _make_document(doc_id: str, values: np.ndarray, tokens: tuple[str, ...] | None) -> CorpusDocument:
    try:
        matrix = EmbeddingMatrix(values, tokens)
    except (NonFiniteValue, ZeroNormRow, DimensionMismatch) as e:
        raise type(e)(f"doc={doc_id} {e}") from None
    return CorpusDocument(doc_id, matrix)


# ---- power traces -----------------------------------------------------------

def load_power_traces(path: str | Path) -> list[PowerTrace]:
    """Parse a trace CSV into one PowerTrace per document, in file order."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MalformedHeader("trace file is empty") from None
        if [h.strip() for h in header] != TRACE_HEADER:
            raise MalformedHeader(f"trace header must be {','.join(TRACE_HEADER)!r}, got {','.join(header)!r}")
        order: list[str] = []
        deltas: dict[str, float] = {}
        samples: dict[str, list[float]] = {}
        current: str | None = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise MalformedHeader(f"line {lineno}: expected 3 fields, got {len(row)}")
            doc_id = row[0].strip()
            try:
                delta_t = float(row[1])
                watts = float(row[2])
            except ValueError:
                raise MalformedHeader(f"line {lineno}: non-numeric delta_t_s or watts") from None
            if not np.isfinite(watts) or not np.isfinite(delta_t):
                raise NonFiniteValue(f"doc={doc_id}: non-finite value at line {lineno}")
            if watts < 0.0:
                raise NegativePower(f"doc={doc_id}: {watts} W at line {lineno}")
            if doc_id != current:
                if doc_id in samples:
                    raise DuplicateDocId(f"doc={doc_id}: trace rows are not contiguous (line {lineno})")
                current = doc_id
                order.append(doc_id)
                deltas[doc_id] = delta_t
                samples[doc_id] = []
            elif delta_t != deltas[doc_id]:
                raise NonUniformDeltaT(
                    f"doc={doc_id}: delta_t changed from {deltas[doc_id]} to {delta_t} at line {lineno}"
                )
            samples[doc_id].append(watts)
    if not order:
        raise MalformedHeader("trace file has a header but no samples")
    return [PowerTrace(d, deltas[d], np.asarray(samples[d])) for d in order]


def match_traces(docs: list[CorpusDocument], traces: list[PowerTrace]) -> dict[str, PowerTrace]:
    """Cross-check traces against a corpus; every document must have exactly one trace."""
    by_id = {t.doc_id: t for t in traces}
    known = {d.doc_id for d in docs}
    for t in traces:
        if t.doc_id not in known:
            raise UnknownDocId(f"trace doc={t.doc_id} is not in the corpus")
    missing = [d.doc_id for d in docs if d.doc_id not in by_id]
    if missing:
        raise MissingTrace(f"{len(missing)} document(s) have no trace, first missing doc={missing[0]}")
    return by_id


# ---- row normalization ------------------------------------------------------

def normalize_rows(m: EmbeddingMatrix) -> EmbeddingMatrix:
    """Rescale every row to unit Euclidean norm, preserving direction."""
    norms = np.linalg.norm(m.values.astype(np.float64), axis=1)
    if np.any(norms == 0.0):
        row = int(np.argmax(norms == 0.0))
        raise ZeroNormRow(f"row={row} has zero Euclidean norm")
    out = (m.values.astype(np.float64) / norms[:, None]).astype(np.float32)
    return EmbeddingMatrix(out, m.tokens)


# ---- atomic output ----------------------------------------------------------

def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write via temp file + rename so interrupted runs never leave partial output."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))
