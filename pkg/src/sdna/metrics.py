"""Formal metrics, the ablation grid, and the SSI-vs-K scaling study.

Per-document energy comes from power traces (never live hardware): with a
trace sampled every delta_t seconds, E_d = sum(P_d) * delta_t joules.  The
corpus-level energy utilization density EUD is the global ratio
sum(E_d) / sum(T_d) in J/token, which is not the mean of the per-document
densities rho_d = E_d / T_d unless all token counts agree.

Routing time is wall-clock of the route phase only (monotonic clock,
microsecond resolution); fitting and IO are excluded, matching how the
scaling and ablation tables report it.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .embedding_io import CorpusDocument, PowerTrace, atomic_write_text, match_traces
from .energy import RoutingOutcome, route_corpus
from .errors import EmptyInput, SdnaError, TooFewPoints, ZeroTokens
from .experts import fit_experts


@dataclass(frozen=True, eq=False)
class MetricsReport:
    """Corpus-level metrics; energy fields are None when no traces were given."""

    corpus_id: str
    n_docs: int
    mean_ssi: float
    eud_j_per_token: float | None
    mean_rho_j_per_token: float | None
    per_doc: list[dict]
    wall_time_route_s: float


@dataclass(frozen=True)
class ScalingPoint:
    k: int
    ssi: float
    routing_time_s: float
    eud: float | None


# ---- energy accounting ----------------------------------------------------------

def document_energy(trace: PowerTrace) -> float:
    """Joules consumed over one document: sample sum times delta_t, in float64."""
    return float(trace.samples.sum(dtype=np.float64) * trace.delta_t)


def energy_density(e_d: float, t_d: int) -> float:
    """Per-document J/token."""
    if t_d < 1:
        raise ZeroTokens(f"token count must be >= 1, got {t_d}")
    return e_d / t_d


def corpus_eud(per_doc: list[tuple[float, int]]) -> float:
    """Global sum(E_d) / sum(T_d); NOT the mean of the per-document densities."""
    if not per_doc:
        raise EmptyInput("no per-document (energy, tokens) pairs")
    total_e = math.fsum(e for e, _ in per_doc)
    total_t = sum(t for _, t in per_doc)
    if total_t < 1:
        raise ZeroTokens("corpus has no tokens")
    return total_e / total_t


def aggregate_ssi(outcomes: list[RoutingOutcome]) -> float:
    """Mean per-document SSI."""
    if not outcomes:
        raise EmptyInput("no routing outcomes to aggregate")
    return math.fsum(o.ssi for o in outcomes) / len(outcomes)


# ---- report assembly --------------------------------------------------------------

def build_metrics_report(
    corpus_id: str,
    docs: list[CorpusDocument],
    outcomes: list[RoutingOutcome],
    traces: list[PowerTrace] | None = None,
    wall_time_route_s: float = 0.0,
) -> MetricsReport:
    per_doc = []
    pairs = []
    trace_map = match_traces(docs, traces) if traces is not None else None
    for doc, outcome in zip(docs, outcomes):
        entry: dict = {"doc_id": doc.doc_id, "t_d": doc.token_count, "ssi": outcome.ssi}
        if trace_map is not None:
            e_d = document_energy(trace_map[doc.doc_id])
            entry["e_d_j"] = e_d
            entry["rho_d_j_per_token"] = energy_density(e_d, doc.token_count)
            pairs.append((e_d, doc.token_count))
        per_doc.append(entry)
    eud = corpus_eud(pairs) if pairs else None
    mean_rho = (
        math.fsum(e["rho_d_j_per_token"] for e in per_doc) / len(per_doc) if pairs else None
    )
    return MetricsReport(
        corpus_id=corpus_id,
        n_docs=len(docs),
        mean_ssi=aggregate_ssi(outcomes),
        eud_j_per_token=eud,
        mean_rho_j_per_token=mean_rho,
        per_doc=per_doc,
        wall_time_route_s=wall_time_route_s,
    )


def metrics_report_json(report: MetricsReport) -> str:
    """Stable-order JSON; wall_time_route_s is the only run-dependent field."""
    lines = ["{"]
    lines.append(f'  "corpus_id": {_js(report.corpus_id)},')
    lines.append(f'  "n_docs": {report.n_docs},')
    lines.append(f'  "mean_ssi": {report.mean_ssi!r},')
    if report.eud_j_per_token is not None:
        lines.append(f'  "eud_j_per_token": {report.eud_j_per_token!r},')
        lines.append(f'  "mean_rho_j_per_token": {report.mean_rho_j_per_token!r},')
    body = []
    for e in report.per_doc:
        parts = [f'"doc_id": {_js(e["doc_id"])}', f'"t_d": {e["t_d"]}']
        if "e_d_j" in e:
            parts.append(f'"e_d_j": {e["e_d_j"]!r}')
            parts.append(f'"rho_d_j_per_token": {e["rho_d_j_per_token"]!r}')
        parts.append(f'"ssi": {e["ssi"]!r}')
        body.append("    {" + ", ".join(parts) + "}")
    lines.append('  "per_doc": [\n' + ",\n".join(body) + "\n  ],")
    lines.append(f'  "wall_time_route_s": {report.wall_time_route_s:.6f}')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _js(s: str) -> str:
    import json

    return json.dumps(s)


# ---- logarithmic fit ---------------------------------------------------------------

def fit_log_curve(ks: list[int], ssis: list[float]) -> dict:
    """Least squares of ssi ~ a + b*ln(k); r2 = 1 - SS_res/SS_tot.

    A constant-ssi input has SS_tot = 0; that is reported as r2 = 0 with
    ``degenerate`` set instead of dividing by zero.
    """
    if len(ks) != len(ssis):
        raise ValueError(f"{len(ks)} k values but {len(ssis)} ssi values")
    if len(ks) < 2:
        raise TooFewPoints("need at least 2 points to fit a line")
    xs = np.log(np.asarray(ks, dtype=np.float64))
    ys = np.asarray(ssis, dtype=np.float64)
    xm, ym = xs.mean(), ys.mean()
    sxx = float(((xs - xm) ** 2).sum())
    if sxx == 0.0:
        raise TooFewPoints("need at least 2 distinct k values")
    b = float(((xs - xm) * (ys - ym)).sum()) / sxx
    a = float(ym - b * xm)
    ss_res = float(((ys - (a + b * xs)) ** 2).sum())
    ss_tot = float(((ys - ym) ** 2).sum())
    if ss_tot == 0.0:
        return {"a": a, "b": b, "r2": 0.0, "degenerate": True}
    return {"a": a, "b": b, "r2": 1.0 - ss_res / ss_tot, "degenerate": False}


# ---- experiment harnesses -----------------------------------------------------------

def _timed_route(docs, model, threads, **route_opts):
    start = time.perf_counter()
    outcomes = route_corpus(docs, model, threads=threads, **route_opts)
    return outcomes, time.perf_counter() - start


def _cell_eud(docs, traces):
    if traces is None:
        return None
    trace_map = match_traces(docs, traces)
    return corpus_eud([(document_energy(trace_map[d.doc_id]), d.token_count) for d in docs])


def ablation_grid(
    corpus: list[CorpusDocument],
    ks: list[int],
    taus: list[float],
    traces: list[PowerTrace] | None = None,
    *,
    seed: int = 0,
    route_threads: int = 1,
    fit_options: dict | None = None,
    route_options: dict | None = None,
) -> list[dict]:
    """Fit + route + measure for every (k, tau) cell, rows in grid order.

    A failing cell records the error name in its ``status`` column and
    leaves the metric columns empty rather than aborting the grid.
    """
    if not ks or not taus:
        raise EmptyInput("ablation grid needs at least one k and one tau")
    fit_options = dict(fit_options or {})
    route_options = dict(route_options or {})
    rows = []
    for k in ks:
        for tau in taus:
            row = {
                "k": k,
                "tau": tau,
                "eud_j_per_token": None,
                "mean_ssi": None,
                "route_time_s": None,
                "route_threads": route_threads,
                "status": "ok",
            }
            try:
                model = fit_experts(corpus, k, tau, seed=seed, **fit_options)
                outcomes, elapsed = _timed_route(corpus, model, route_threads, **route_options)
                row["mean_ssi"] = aggregate_ssi(outcomes)
                row["route_time_s"] = elapsed
                row["eud_j_per_token"] = _cell_eud(corpus, traces)
            except SdnaError as e:
                row["status"] = type(e).__name__
            rows.append(row)
    return rows


def scaling_study(
    corpus: list[CorpusDocument],
    ks: list[int],
    seed: int = 0,
    traces: list[PowerTrace] | None = None,
    *,
    tau: float = 0.75,
    route_threads: int = 1,
    fit_options: dict | None = None,
    route_options: dict | None = None,
) -> tuple[list[ScalingPoint], dict]:
    """SSI, routing time, and EUD per expert count, plus the logarithmic fit."""
    if len(ks) < 3:
        raise TooFewPoints(f"scaling study needs >= 3 expert counts, got {len(ks)}")
    if sorted(ks) != list(ks):
        raise ValueError("expert counts must be sorted ascending")
    fit_options = dict(fit_options or {})
    route_options = dict(route_options or {})
    eud = _cell_eud(corpus, traces)
    points = []
    for k in ks:
        model = fit_experts(corpus, k, tau, seed=seed, **fit_options)
        outcomes, elapsed = _timed_route(corpus, model, route_threads, **route_options)
        points.append(ScalingPoint(k=k, ssi=aggregate_ssi(outcomes), routing_time_s=elapsed, eud=eud))
    fit = fit_log_curve(ks, [p.ssi for p in points])
    return points, fit


# ---- CSV writers ---------------------------------------------------------------------

def _cell(x, time_field: bool = False) -> str:
    if x is None:
        return ""
    if time_field:
        return "%.6f" % x
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_ablation_csv(rows: list[dict], path) -> None:
    lines = ["k,tau,eud_j_per_token,mean_ssi,route_time_s,route_threads,status"]
    for r in rows:
        lines.append(
            ",".join(
                [
                    str(r["k"]),
                    repr(float(r["tau"])),
                    _cell(r["eud_j_per_token"]),
                    _cell(r["mean_ssi"]),
                    _cell(r["route_time_s"], time_field=True),
                    str(r["route_threads"]),
                    r["status"],
                ]
            )
        )
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_scaling_csv(points: list[ScalingPoint], fit: dict, path) -> None:
    lines = ["k,ssi,route_time_s,eud_j_per_token"]
    for p in points:
        lines.append(
            ",".join(
                [str(p.k), repr(p.ssi), _cell(p.routing_time_s, time_field=True), _cell(p.eud)]
            )
        )
    lines.append(f"# fit a={fit['a']!r} b={fit['b']!r} r2={fit['r2']!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")
