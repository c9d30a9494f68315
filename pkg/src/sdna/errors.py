"""Exception hierarchy shared by all sdna modules.

Every error raised on bad input derives from SdnaError so callers (and the
CLI) can distinguish input/validation failures from genuine bugs.
"""


class SdnaError(Exception):
    """Base class for all input and validation errors."""


# ---- corpus / trace loading -------------------------------------------------

class MalformedHeader(SdnaError):
    """File magic, version, structure, or encoding is not what the format declares."""


class DimensionMismatch(SdnaError):
    """A row's length disagrees with the declared embedding dimension."""


class NonFiniteValue(SdnaError):
    """A NaN or Inf was found where only finite values are allowed."""


class ZeroNormRow(SdnaError):
    """A token vector has Euclidean norm 0; cosine similarity is undefined."""


class DuplicateDocId(SdnaError):
    """The same doc_id appears more than once in a corpus or trace file."""


class NegativePower(SdnaError):
    """A power trace sample is below 0 W."""


class NonUniformDeltaT(SdnaError):
    """Sampling interval changes within one document's trace, or is not > 0."""


class UnknownDocId(SdnaError):
    """A trace references a doc_id that does not exist in the corpus."""


class MissingTrace(SdnaError):
    """A corpus document has no matching power trace."""


# ---- codon assembly ---------------------------------------------------------

class OverlappingCodons(SdnaError):
    """Two codons passed to a cross-codon computation share token indices."""


class IndexOutOfRange(SdnaError):
    """A token or expert index lies outside its valid range."""


# ---- expert fitting / routing -----------------------------------------------

class TooFewPoints(SdnaError):
    """Fewer fit points (or grid entries) than the operation requires."""


class DegenerateInput(SdnaError):
    """Input admits no meaningful solution (e.g. all fit points identical)."""


class ZeroNormInput(SdnaError):
    """An input vector has zero norm where a direction is required."""


class DimMismatch(SdnaError):
    """Vector/model dimensionalities disagree."""


class NotADistribution(SdnaError):
    """A vector claimed to be a probability distribution is not one."""


# ---- metrics ----------------------------------------------------------------

class ZeroTokens(SdnaError):
    """A per-token quantity was requested over zero tokens."""


class EmptyInput(SdnaError):
    """An aggregate was requested over an empty collection."""
