"""Exporter error types."""

from __future__ import annotations


class ExportError(Exception):
    """Base class for everything the exporter raises on purpose."""


class EncoderUnavailable(ExportError):
    """The requested encoder could not be loaded."""


class EmptyDocument(ExportError):
    """A document produced no token vectors (blank text or all-special)."""
