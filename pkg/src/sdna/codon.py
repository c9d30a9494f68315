"""Codon assembly: pairwise similarity, semantic energy, and the forces.

Tokens fuse left-to-right into codons: token i+1 joins the current codon
iff the cosine similarity of adjacent rows S(i, i+1) >= tau, otherwise a
new codon starts.  Only the adjacent pair drives the merge decision; the
full similarity matrix is still needed because binding and non-binding
forces range over all member pairs.

Binding-force normalization is configurable:

    pair_mean  mean of S(i, j) over unordered distinct member pairs
               (bounded in [-1, 1], comparable across codon sizes; default)
    literal    the same pair sum divided by (|C| - 1)

A singleton codon has binding force 1.0 by definition in both modes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .embedding_io import EmbeddingMatrix, atomic_write_text
from .errors import IndexOutOfRange, OverlappingCodons, ZeroNormRow

BINDING_MODES = ("pair_mean", "literal")


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    """Symmetric cosine-similarity matrix with unit diagonal.

    The upper triangle is computed once and mirrored, so values[i, j] and
    values[j, i] are identical bytes, not merely close.
    """

    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True, eq=False)
class Codon:
    """A maximal run of contiguous tokens, [start, end] inclusive."""

    start: int
    end: int
    embedding: np.ndarray
    binding_force: float

    @property
    def length(self) -> int:
        return self.end - self.start + 1

    @property
    def span(self) -> tuple[int, int]:
        return (self.start, self.end)


@dataclass(frozen=True, eq=False)
class Segmentation:
    """Ordered codons partitioning [0, n_tokens) with no gaps or overlaps."""

    codons: tuple[Codon, ...]
    n_tokens: int

    @property
    def spans(self) -> list[tuple[int, int]]:
        return [c.span for c in self.codons]


# ---- similarity and energy ----------------------------------------------------

def similarity_matrix(m: EmbeddingMatrix) -> SimilarityMatrix:
    """Cosine similarity of every row pair, float64."""
    v = m.values.astype(np.float64)
    norms = np.linalg.norm(v, axis=1)
    if np.any(norms == 0.0):
        row = int(np.argmax(norms == 0.0))
        raise ZeroNormRow(f"row={row} has zero Euclidean norm")
    unit = v / norms[:, None]
    s = unit @ unit.T
    # mirror the upper triangle so symmetry is exact, then pin the diagonal
    s = np.triu(s) + np.triu(s, 1).T
    np.fill_diagonal(s, 1.0)
    s.setflags(write=False)
    return SimilarityMatrix(s)


def semantic_energy(s: SimilarityMatrix) -> np.ndarray:
    """Pairwise semantic energy 1 - S; zero diagonal, entries in [0, 2]."""
    return 1.0 - s.values


# ---- assembly ----------------------------------------------------------------

def assemble_codons(
    m: EmbeddingMatrix,
    tau: float,
    binding_normalization: str = "pair_mean",
) -> Segmentation:
    """Left-to-right adjacent-threshold merge of tokens into codons.

    Equal similarity merges (the rule is >=).  A 1-token document yields a
    single singleton codon.  Codon embeddings are the 64-bit arithmetic
    mean of the member token vectors.
    """
    s = similarity_matrix(m)
    return _assemble(s, m.values.astype(np.float64), tau, binding_normalization)


def _assemble(
    s: SimilarityMatrix,
    values64: np.ndarray,
    tau: float,
    binding_normalization: str,
) -> Segmentation:
    n = values64.shape[0]
    adjacent = np.diagonal(s.values, offset=1)
    spans = []
    start = 0
    for i in range(n - 1):
        if adjacent[i] < tau:
            spans.append((start, i))
            start = i + 1
    spans.append((start, n - 1))
    codons = tuple(
        Codon(
            a,
            b,
            values64[a:b + 1].mean(axis=0),
            _binding_from_span(s.values, a, b, binding_normalization),
        )
        for a, b in spans
    )
    return Segmentation(codons, n)


# ---- forces -------------------------------------------------------------------

def binding_force(s: SimilarityMatrix, c: Codon, normalization: str = "pair_mean") -> float:
    """Cohesion of one codon from its pairwise member similarities."""
    if c.start < 0 or c.end >= s.n or c.start > c.end:
        raise IndexOutOfRange(f"codon [{c.start}, {c.end}] outside similarity range [0, {s.n})")
    return _binding_from_span(s.values, c.start, c.end, normalization)


def _binding_from_span(values: np.ndarray, start: int, end: int, normalization: str) -> float:
    if normalization not in BINDING_MODES:
        raise ValueError(f"binding normalization must be one of {BINDING_MODES}, got {normalization!r}")
    size = end - start + 1
    if size == 1:
        return 1.0
    block = values[start:end + 1, start:end + 1]
    pair_sum = float(np.triu(block, 1).sum())
    if normalization == "pair_mean":
        return pair_sum / (size * (size - 1) // 2)
    return pair_sum / (size - 1)


def non_binding_force(s: SimilarityMatrix, a: Codon, b: Codon) -> float:
    """Mean cross-similarity between the tokens of two disjoint codons."""
    for c in (a, b):
        if c.start < 0 or c.end >= s.n or c.start > c.end:
            raise IndexOutOfRange(f"codon [{c.start}, {c.end}] outside similarity range [0, {s.n})")
    if a.start <= b.end and b.start <= a.end:
        raise OverlappingCodons(f"codons [{a.start}, {a.end}] and [{b.start}, {b.end}] share tokens")
    block = s.values[a.start:a.end + 1, b.start:b.end + 1]
    return float(block.sum() / block.size)


# ---- exports ------------------------------------------------------------------

def segmentation_record(doc_id: str, tau: float, seg: Segmentation) -> dict:
    """JSON-ready record of one document's codon configuration."""
    return {
        "doc_id": doc_id,
        "tau": tau,
        "codons": [
            {"start": c.start, "end": c.end, "binding_force": c.binding_force}
            for c in seg.codons
        ],
    }


def write_segmentation(doc_id: str, tau: float, seg: Segmentation, path: str | Path) -> None:
    atomic_write_text(path, json.dumps(segmentation_record(doc_id, tau, seg)) + "\n")


def write_energy_csv(energy: np.ndarray, path: str | Path) -> None:
    """n x n semantic-energy matrix as plain CSV, for offline heatmaps."""
    lines = [",".join("%.9g" % x for x in row) for row in energy]
    atomic_write_text(path, "\n".join(lines) + "\n")
