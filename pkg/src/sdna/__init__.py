"""Energy-guided routing of token-embedding documents to semantic experts.

The pipeline: merge adjacent high-similarity tokens into codons, fit K
expert centers over codon embeddings, then send each document to the
expert that minimizes a total energy blending codon cohesion, expert
affinity, activation entropy, and a latency cost table.
"""

from __future__ import annotations

from .codon import (
    BINDING_MODES,
    Codon,
    Segmentation,
    SimilarityMatrix,
    assemble_codons,
    binding_force,
    non_binding_force,
    semantic_energy,
    similarity_matrix,
)
from .embedding_io import (
    CorpusDocument,
    EmbeddingMatrix,
    PowerTrace,
    load_corpus,
    load_power_traces,
    match_traces,
    normalize_rows,
    write_corpus,
)
from .energy import (
    COHESION_MODES,
    DOC_EMBEDDING_MODES,
    RoutingOutcome,
    activation_entropy,
    route,
    route_corpus,
    ssi_from_entropy,
    total_energy,
)
from .errors import (
    DegenerateInput,
    DimensionMismatch,
    DimMismatch,
    DuplicateDocId,
    EmptyInput,
    IndexOutOfRange,
    MalformedHeader,
    MissingTrace,
    NegativePower,
    NonFiniteValue,
    NonUniformDeltaT,
    NotADistribution,
    OverlappingCodons,
    SdnaError,
    TooFewPoints,
    UnknownDocId,
    ZeroNormInput,
    ZeroNormRow,
    ZeroTokens,
)
from .experts import (
    Affinities,
    ExpertModel,
    SplitMix64,
    activation_distribution,
    expert_affinity,
    fit_experts,
    load_model,
    save_model,
)
from .metrics import (
    MetricsReport,
    ScalingPoint,
    ablation_grid,
    aggregate_ssi,
    build_metrics_report,
    corpus_eud,
    document_energy,
    energy_density,
    fit_log_curve,
    scaling_study,
    write_ablation_csv,
    write_scaling_csv,
)

__version__ = "0.1.0"

__all__ = [
    "BINDING_MODES",
    "COHESION_MODES",
    "DOC_EMBEDDING_MODES",
    "Affinities",
    "Codon",
    "CorpusDocument",
    "DegenerateInput",
    "DimMismatch",
    "DimensionMismatch",
    "DuplicateDocId",
    "EmbeddingMatrix",
    "EmptyInput",
    "ExpertModel",
    "IndexOutOfRange",
    "MalformedHeader",
    "MetricsReport",
    "MissingTrace",
    "NegativePower",
    "NonFiniteValue",
    "NonUniformDeltaT",
    "NotADistribution",
    "OverlappingCodons",
    "PowerTrace",
    "RoutingOutcome",
    "ScalingPoint",
    "SdnaError",
    "Segmentation",
    "SimilarityMatrix",
    "SplitMix64",
    "TooFewPoints",
    "UnknownDocId",
    "ZeroNormInput",
    "ZeroNormRow",
    "ZeroTokens",
    "ablation_grid",
    "activation_distribution",
    "activation_entropy",
    "aggregate_ssi",
    "assemble_codons",
    "binding_force",
    "build_metrics_report",
    "corpus_eud",
    "document_energy",
    "energy_density",
    "expert_affinity",
    "fit_experts",
    "fit_log_curve",
    "load_corpus",
    "load_model",
    "load_power_traces",
    "match_traces",
    "non_binding_force",
    "normalize_rows",
    "route",
    "route_corpus",
    "save_model",
    "scaling_study",
    "semantic_energy",
    "similarity_matrix",
    "ssi_from_entropy",
    "total_energy",
    "write_ablation_csv",
    "write_corpus",
    "write_scaling_csv",
]
