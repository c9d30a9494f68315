"""Export token-level transformer embeddings as corpus files."""

from __future__ import annotations

from .encoder import DocumentVectors, Encoder, load_encoder
from .errors import EmptyDocument, EncoderUnavailable, ExportError
from .export import ExportManifest, export, manifest_path_for, read_texts
from .writer import ExportedDocument, write_corpus, write_manifest

__version__ = "0.1.0"

__all__ = [
    "DocumentVectors",
    "EmptyDocument",
    "Encoder",
    "EncoderUnavailable",
    "ExportError",
    "ExportManifest",
    "ExportedDocument",
    "export",
    "load_encoder",
    "manifest_path_for",
    "read_texts",
    "write_corpus",
    "write_manifest",
]
