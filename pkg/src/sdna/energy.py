"""Total-energy evaluation and argmin routing.

The per-expert total energy of an input is

    cohesion deficit   sum over codons of (1 - F_binding), or its mean
                       with ``cohesion="mean"`` (the sum grows with
                       document length and can swamp the other terms)
    affinity deficit   1 - cos(input embedding, expert center)
    entropy penalty    beta * H_a of the activation distribution
    cost penalty       gamma * cost_table[expert]  (J/token)

Only the affinity and cost terms depend on the expert, so with a uniform
cost table the chosen expert is exactly the nearest center by cosine.
Routing picks the argmin, breaking exact ties toward the lowest index.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .codon import Segmentation, SimilarityMatrix, _assemble, _binding_from_span, similarity_matrix
from .embedding_io import CorpusDocument
from .errors import DimMismatch, IndexOutOfRange, NotADistribution
from .experts import Affinities, ExpertModel, activation_distribution, expert_affinity

COHESION_MODES = ("sum", "mean")
DOC_EMBEDDING_MODES = ("codon_mean", "token_mean")


@dataclass(frozen=True, eq=False)
class RoutingOutcome:
    """Everything the routing decision produced for one document."""

    doc_id: str
    chosen_expert: int
    energies: np.ndarray
    p: np.ndarray
    entropy_h_a: float
    ssi: float
    cohesion_term: float
    latency_term_used: float
    n_codons: int


def activation_entropy(p: np.ndarray) -> float:
    """Natural-log entropy of a probability vector; 0 * log 0 counts as 0."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p < 0.0) or not np.all(np.isfinite(p)):
        raise NotADistribution("probabilities must be finite and >= 0")
    total = float(p.sum())
    if abs(total - 1.0) > 1e-6:
        raise NotADistribution(f"probabilities sum to {total}, not 1")
    nz = p[p > 0.0]
    return float(-(nz * np.log(nz)).sum())


def ssi_from_entropy(h_a: float, k: int) -> float:
    """Entropy-normalized stability in [0, 1]; 1 means deterministic routing."""
    if k < 1:
        raise IndexOutOfRange(f"k must be >= 1, got {k}")
    if k == 1:
        return 1.0
    return min(1.0, max(0.0, 1.0 - h_a / math.log(k)))


def _cohesion_term(seg: Segmentation, s: SimilarityMatrix, cohesion: str, binding_normalization: str) -> float:
    if cohesion not in COHESION_MODES:
        raise ValueError(f"cohesion must be one of {COHESION_MODES}, got {cohesion!r}")
    total = sum(
        1.0 - _binding_from_span(s.values, c.start, c.end, binding_normalization)
        for c in seg.codons
    )
    return total / len(seg.codons) if cohesion == "mean" else total


def total_energy(
    seg: Segmentation,
    s: SimilarityMatrix,
    p: np.ndarray,
    model: ExpertModel,
    expert: int,
    affinity: float,
    *,
    cohesion: str = "sum",
    binding_normalization: str = "pair_mean",
) -> float:
    """Total energy of routing this segmentation to one expert."""
    if not (0 <= expert < model.k):
        raise IndexOutOfRange(f"expert {expert} outside [0, {model.k})")
    return (
        _cohesion_term(seg, s, cohesion, binding_normalization)
        + (1.0 - affinity)
        + model.beta * activation_entropy(p)
        + model.gamma * float(model.cost_table[expert])
    )


def route(
    doc: CorpusDocument,
    model: ExpertModel,
    *,
    cohesion: str = "sum",
    binding_normalization: str = "pair_mean",
    doc_embedding: str = "codon_mean",
) -> RoutingOutcome:
    """Segment at the model's tau, then choose the minimal-energy expert.

    One activation distribution is computed per document, from the
    document-level affinities; the document embedding is the unweighted
    mean of its codon embeddings (``doc_embedding="token_mean"`` averages
    raw token vectors instead).
    """
    if doc_embedding not in DOC_EMBEDDING_MODES:
        raise ValueError(f"doc_embedding must be one of {DOC_EMBEDDING_MODES}, got {doc_embedding!r}")
    if doc.embeddings.dim != model.dim:
        raise DimMismatch(f"doc={doc.doc_id} dim={doc.embeddings.dim}, model dim={model.dim}")
    values64 = doc.embeddings.values.astype(np.float64)
    s = similarity_matrix(doc.embeddings)
    seg = _assemble(s, values64, model.tau, binding_normalization)
    if doc_embedding == "codon_mean":
        x = np.stack([c.embedding for c in seg.codons]).mean(axis=0)
    else:
        x = values64.mean(axis=0)
    affinities = expert_affinity(x, model)
    p = activation_distribution(affinities, model.temperature)
    h_a = activation_entropy(p)
    cohesion_term = _cohesion_term(seg, s, cohesion, binding_normalization)
    energies = cohesion_term + (1.0 - affinities.values) + model.beta * h_a + model.gamma * model.cost_table
    chosen = int(np.argmin(energies))
    energies.setflags(write=False)
    p.setflags(write=False)
    return RoutingOutcome(
        doc_id=doc.doc_id,
        chosen_expert=chosen,
        energies=energies,
        p=p,
        entropy_h_a=h_a,
        ssi=ssi_from_entropy(h_a, model.k),
        cohesion_term=cohesion_term,
        latency_term_used=model.gamma * float(model.cost_table[chosen]),
        n_codons=len(seg.codons),
    )


def route_corpus(
    docs: list[CorpusDocument],
    model: ExpertModel,
    *,
    threads: int = 1,
    cohesion: str = "sum",
    binding_normalization: str = "pair_mean",
    doc_embedding: str = "codon_mean",
) -> list[RoutingOutcome]:
    """Route every document; results in corpus order regardless of threading."""
    def one(doc: CorpusDocument) -> RoutingOutcome:
        return route(
            doc,
            model,
            cohesion=cohesion,
            binding_normalization=binding_normalization,
            doc_embedding=doc_embedding,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, docs))
    return [one(doc) for doc in docs]


def outcome_record(o: RoutingOutcome, verbose: bool = False) -> dict:
    """JSON-ready routing report line."""
    rec = {
        "doc_id": o.doc_id,
        "chosen_expert": o.chosen_expert,
        "ssi": o.ssi,
        "h_a": o.entropy_h_a,
        "cohesion_term": o.cohesion_term,
        "energies_min": float(o.energies.min()),
        "energies_max": float(o.energies.max()),
        "n_codons": o.n_codons,
    }
    if verbose:
        rec["energies"] = [float(x) for x in o.energies]
        rec["p"] = [float(x) for x in o.p]
        rec["latency_term_used"] = o.latency_term_used
    return rec
