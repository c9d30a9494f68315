"""Expert centers: deterministic K-means fitting, affinities, activations.

Fitting runs Lloyd's algorithm over the pooled codon mean-embeddings of a
corpus (or whole-document means, see ``fit_points``), initialized with
greedy k-means++.  All randomness comes from an explicit splitmix64
generator, documented below, so the same seed reproduces the same model
bit-for-bit on any platform and regardless of thread count:

    state := (state + 0x9E3779B97F4A7C15) mod 2^64
    z := state
    z := (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9 mod 2^64
    z := (z XOR (z >> 27)) * 0x94D049BB133111EB mod 2^64
    output z XOR (z >> 31)

Uniform doubles in [0, 1) are the top 53 bits of the output times 2^-53.
Greedy k-means++ draws 2 + floor(ln k) candidate points per step with
probability proportional to squared distance from the chosen centers and
keeps the candidate that minimizes the resulting potential.

Distance computations avoid BLAS matmul on purpose: chunked elementwise
broadcasting keeps the reduction order fixed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .codon import assemble_codons
from .embedding_io import CorpusDocument, atomic_write_text
from .errors import (
    DegenerateInput,
    DimMismatch,
    MalformedHeader,
    TooFewPoints,
    ZeroNormInput,
)

DEFAULT_BETA = 0.1
DEFAULT_GAMMA = 0.01
DEFAULT_TEMPERATURE = 1.0
DEFAULT_MAX_ITER = 100
DEFAULT_TOL = 1e-6

FIT_POINT_MODES = ("codons", "documents")

_MASK64 = (1 << 64) - 1


class SplitMix64:
    """The splitmix64 generator; see the module docstring for the recurrence."""

    def __init__(self, seed: int):
        self.state = seed & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def randint(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        return min(int(self.random() * n), n - 1)


@dataclass(frozen=True, eq=False)
class ExpertModel:
    """K fitted centers plus the routing hyperparameters."""

    k: int
    dim: int
    centroids: np.ndarray
    tau: float
    beta: float
    gamma: float
    temperature: float
    cost_table: np.ndarray
    seed: int
    fit_stats: dict = field(default_factory=dict)

    def __post_init__(self):
        centroids = np.asarray(self.centroids, dtype=np.float64)
        if centroids.shape != (self.k, self.dim):
            raise DimMismatch(f"centroids shape {centroids.shape} != (k={self.k}, dim={self.dim})")
        if not np.all(np.isfinite(centroids)):
            raise DegenerateInput("non-finite centroid")
        if np.any(np.linalg.norm(centroids, axis=1) == 0.0):
            raise DegenerateInput("centroid with zero norm")
        cost = np.asarray(self.cost_table, dtype=np.float64)
        if cost.shape != (self.k,):
            raise DimMismatch(f"cost_table length {cost.shape} != k={self.k}")
        if np.any(cost < 0.0) or not np.all(np.isfinite(cost)):
            raise ValueError("cost_table entries must be finite and >= 0")
        if not (self.temperature > 0.0):
            raise ValueError(f"temperature must be > 0, got {self.temperature}")
        centroids.setflags(write=False)
        cost.setflags(write=False)
        object.__setattr__(self, "centroids", centroids)
        object.__setattr__(self, "cost_table", cost)


@dataclass(frozen=True, eq=False)
class Affinities:
    """Cosine of one input embedding against every expert center."""

    values: np.ndarray

    @property
    def k(self) -> int:
        return self.values.shape[0]


# ---- fitting -------------------------------------------------------------------

def collect_fit_points(
    corpus: list[CorpusDocument],
    tau: float,
    fit_points: str = "codons",
    binding_normalization: str = "pair_mean",
) -> np.ndarray:
    """Pool the K-means inputs across the corpus, in document order."""
    if fit_points not in FIT_POINT_MODES:
        raise ValueError(f"fit_points must be one of {FIT_POINT_MODES}, got {fit_points!r}")
    rows = []
    for doc in corpus:
        seg = assemble_codons(doc.embeddings, tau, binding_normalization)
        embs = np.stack([c.embedding for c in seg.codons])
        if fit_points == "codons":
            rows.append(embs)
        else:
            rows.append(embs.mean(axis=0, keepdims=True))
    return np.concatenate(rows, axis=0)


def _sqdist_chunked(points: np.ndarray, centers: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Squared Euclidean distances with a fixed, thread-independent reduction order."""
    out = np.empty((points.shape[0], centers.shape[0]), dtype=np.float64)
    for lo in range(0, points.shape[0], chunk):
        hi = min(lo + chunk, points.shape[0])
        diff = points[lo:hi, None, :] - centers[None, :, :]
        out[lo:hi] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def _kmeans_pp(points: np.ndarray, k: int, rng: SplitMix64) -> np.ndarray:
    """Greedy k-means++ seeding; ties break toward the lowest candidate index."""
    n = points.shape[0]
    n_local = 2 + int(math.log(k)) if k > 1 else 1
    first = rng.randint(n)
    centers = [points[first]]
    best = _sqdist_chunked(points, points[first:first + 1])[:, 0]
    for _ in range(k - 1):
        total = float(best.sum())
        if total <= 0.0:
            # all remaining mass at distance zero: reuse an arbitrary point
            idx = rng.randint(n)
            centers.append(points[idx])
            continue
        cum = np.cumsum(best)
        cand = np.searchsorted(cum, np.array([rng.random() * total for _ in range(n_local)]), side="right")
        cand = np.minimum(cand, n - 1)
        best_pot = None
        best_idx = None
        best_d = None
        for ci in cand:
            d = _sqdist_chunked(points, points[ci:ci + 1])[:, 0]
            nb = np.minimum(best, d)
            pot = float(nb.sum())
            if best_pot is None or pot < best_pot:
                best_pot, best_idx, best_d = pot, int(ci), nb
        centers.append(points[best_idx])
        best = best_d
    return np.stack(centers)


def fit_experts(
    corpus: list[CorpusDocument],
    k: int,
    tau: float,
    seed: int = 0,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    *,
    beta: float = DEFAULT_BETA,
    gamma: float = DEFAULT_GAMMA,
    temperature: float = DEFAULT_TEMPERATURE,
    cost_table: np.ndarray | list | None = None,
    fit_points: str = "codons",
    binding_normalization: str = "pair_mean",
) -> ExpertModel:
    """Lloyd's K-means over the corpus's codon embeddings.

    Stops when the largest centroid shift drops below ``tol`` or after
    ``max_iter`` iterations.  An empty cluster is re-seeded from the point
    farthest from its assigned centroid.  ``fit_stats`` records the
    iteration count, final inertia, and the per-iteration inertia history
    (the history stays in memory; the model file keeps only the first two).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    points = collect_fit_points(corpus, tau, fit_points, binding_normalization)
    n = points.shape[0]
    if n < k:
        raise TooFewPoints(f"{n} fit points for k={k}")
    if k > 1 and np.all(points == points[0]):
        raise DegenerateInput(f"all {n} fit points identical, cannot place k={k} centers")

    rng = SplitMix64(seed)
    centroids = _kmeans_pp(points, k, rng)
    history: list[float] = []
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        d2 = _sqdist_chunked(points, centroids)
        assign = np.argmin(d2, axis=1)
        min_d2 = d2[np.arange(n), assign]
        for j in range(k):
            if not np.any(assign == j):
                far = int(np.argmax(min_d2))
                centroids = centroids.copy()
                centroids[j] = points[far]
                assign[far] = j
                min_d2[far] = 0.0
        history.append(float(min_d2.sum()))
        # fixed-order accumulation: np.add.at walks points in index order
        sums = np.zeros_like(centroids)
        np.add.at(sums, assign, points)
        counts = np.bincount(assign, minlength=k).astype(np.float64)
        # a cluster can still end up empty when duplicate points make the
        # reseed steal the same farthest point twice; it keeps its centroid
        filled = counts > 0
        new_centroids = centroids.copy()
        new_centroids[filled] = sums[filled] / counts[filled][:, None]
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if shift < tol:
            break

    cost = np.zeros(k, dtype=np.float64) if cost_table is None else np.asarray(cost_table, dtype=np.float64)
    return ExpertModel(
        k=k,
        dim=points.shape[1],
        centroids=centroids,
        tau=tau,
        beta=beta,
        gamma=gamma,
        temperature=temperature,
        cost_table=cost,
        seed=seed,
        fit_stats={
            "iterations": iterations,
            "final_inertia": history[-1],
            "inertia_history": history,
        },
    )


# ---- affinity and activation ----------------------------------------------------

def expert_affinity(x: np.ndarray, model: ExpertModel) -> Affinities:
    """Cosine of ``x`` against every centroid."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.dim,):
        raise DimMismatch(f"input shape {x.shape} != (dim={model.dim},)")
    xn = float(np.linalg.norm(x))
    if xn == 0.0:
        raise ZeroNormInput("input embedding has zero norm")
    cn = np.linalg.norm(model.centroids, axis=1)
    values = (model.centroids @ x) / (cn * xn)
    values.setflags(write=False)
    return Affinities(values)


def activation_distribution(a: Affinities | np.ndarray, temperature: float) -> np.ndarray:
    """Softmax over affinities with max-subtraction for overflow safety."""
    if not (temperature > 0.0):
        raise ValueError(f"temperature must be > 0, got {temperature}")
    values = a.values if isinstance(a, Affinities) else np.asarray(a, dtype=np.float64)
    z = values / temperature
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


# ---- model file -----------------------------------------------------------------

def save_model(model: ExpertModel, path: str | Path) -> None:
    """Stable-order JSON; centroids as decimals with 9 significant digits."""
    rows = ",\n".join(
        "    [" + ", ".join("%.9g" % x for x in row) + "]" for row in model.centroids
    )
    cost = ", ".join(repr(float(x)) for x in model.cost_table)
    text = (
        "{\n"
        f'  "k": {model.k},\n'
        f'  "dim": {model.dim},\n'
        f'  "tau": {float(model.tau)!r},\n'
        f'  "beta": {float(model.beta)!r},\n'
        f'  "gamma": {float(model.gamma)!r},\n'
        f'  "temperature": {float(model.temperature)!r},\n'
        f'  "seed": {model.seed},\n'
        f'  "cost_table": [{cost}],\n'
        f'  "centroids": [\n{rows}\n  ],\n'
        f'  "fit_stats": {{"iterations": {model.fit_stats.get("iterations", 0)}, '
        f'"final_inertia": {float(model.fit_stats.get("final_inertia", 0.0))!r}}}\n'
        "}\n"
    )
    atomic_write_text(path, text)


def load_model(path: str | Path) -> ExpertModel:
    try:
        raw = json.loads(Path(path).read_text("utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise MalformedHeader(f"model file is not valid JSON: {e}") from None
    try:
        return ExpertModel(
            k=int(raw["k"]),
            dim=int(raw["dim"]),
            centroids=np.asarray(raw["centroids"], dtype=np.float64),
            tau=float(raw["tau"]),
            beta=float(raw["beta"]),
            gamma=float(raw["gamma"]),
            temperature=float(raw["temperature"]),
            cost_table=np.asarray(raw["cost_table"], dtype=np.float64),
            seed=int(raw["seed"]),
            fit_stats=dict(raw.get("fit_stats", {})),
        )
    except KeyError as e:
        raise MalformedHeader(f"model file is missing field {e}") from None
