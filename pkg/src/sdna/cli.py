"""Command-line entry point: validate, fit, segment, route, ablate, scaling.

Every flag mirrors a RunConfig field one-to-one in kebab-case; an optional
JSON config file supplies defaults and explicit flags override it.  Output
files are written atomically (temp + rename).  Exit codes: 0 success,
1 input/validation error, 2 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
import traceback
from dataclasses import dataclass, fields
from pathlib import Path

from . import codon, embedding_io, energy, experts, metrics
from .errors import SdnaError


@dataclass
class RunConfig:
    corpus_path: str | None = None
    format: str = "binary"
    model_path: str | None = None
    output_path: str | None = None
    traces_path: str | None = None
    metrics_path: str | None = None
    heatmap_dir: str | None = None
    k: int = 50
    tau: float = 0.75
    beta: float = experts.DEFAULT_BETA
    gamma: float = experts.DEFAULT_GAMMA
    temperature: float = experts.DEFAULT_TEMPERATURE
    seed: int = 0
    max_iter: int = experts.DEFAULT_MAX_ITER
    tol: float = experts.DEFAULT_TOL
    cohesion: str = "sum"
    binding_normalization: str = "pair_mean"
    fit_points: str = "codons"
    doc_embedding: str = "codon_mean"
    route_threads: int = 1
    k_list: str | None = None
    tau_list: str | None = None
    verbose: bool = False


_FLAG_DEST = {f.name: f for f in fields(RunConfig)}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; explicit flags override it")
    p.add_argument("--corpus", dest="corpus_path", help="corpus file to read")
    p.add_argument("--format", choices=["binary", "json"], help="corpus file format (default binary)")
    p.add_argument("--model", dest="model_path", help="expert model JSON")
    p.add_argument("--out", dest="output_path", help="output file")
    p.add_argument("--traces", dest="traces_path", help="power trace CSV")
    p.add_argument("--seed", type=int)
    p.add_argument("--verbose", action="store_true", default=None)


def _add_fit_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--temperature", type=float)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--fit-points", dest="fit_points", choices=list(experts.FIT_POINT_MODES))
    p.add_argument("--binding-normalization", dest="binding_normalization", choices=list(codon.BINDING_MODES))


def _add_route_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cohesion", choices=list(energy.COHESION_MODES))
    p.add_argument("--doc-embedding", dest="doc_embedding", choices=list(energy.DOC_EMBEDDING_MODES))
    p.add_argument("--route-threads", dest="route_threads", type=int)
    p.add_argument("--metrics-out", dest="metrics_path", help="metrics JSON (default: <out>.metrics.json)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sdna", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="load a corpus (and optional traces) and check every invariant")
    _add_common(p)

    p = sub.add_parser("fit", help="fit K expert centers and write the model JSON")
    _add_common(p)
    _add_fit_flags(p)

    p = sub.add_parser("segment", help="write per-document codon segmentations (JSON lines)")
    _add_common(p)
    p.add_argument("--tau", type=float)
    p.add_argument("--binding-normalization", dest="binding_normalization", choices=list(codon.BINDING_MODES))
    p.add_argument("--heatmap-dir", dest="heatmap_dir", help="also write per-document semantic-energy CSVs here")

    p = sub.add_parser("route", help="route every document and write report + metrics")
    _add_common(p)
    _add_route_flags(p)
    p.add_argument("--binding-normalization", dest="binding_normalization", choices=list(codon.BINDING_MODES))

    p = sub.add_parser("ablate", help="run the (k, tau) ablation grid and write a CSV")
    _add_common(p)
    _add_fit_flags(p)
    _add_route_flags(p)
    p.add_argument("--k-list", dest="k_list", help="comma-separated expert counts")
    p.add_argument("--tau-list", dest="tau_list", help="comma-separated merge thresholds")

    p = sub.add_parser("scaling", help="run the SSI-vs-K scaling study and write a CSV")
    _add_common(p)
    _add_fit_flags(p)
    _add_route_flags(p)
    p.add_argument("--k-list", dest="k_list", help="comma-separated expert counts, ascending")

    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        raw = json.loads(Path(args.config).read_text("utf-8"))
        for key, value in raw.items():
            if key not in _FLAG_DEST:
                raise ValueError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
    for f in fields(RunConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            setattr(cfg, f.name, value)
    return cfg


def _require(cfg: RunConfig, *names: str) -> None:
    human = {"corpus_path": "--corpus", "output_path": "--out", "model_path": "--model"}
    for name in names:
        if getattr(cfg, name) is None:
            raise ValueError(f"{human.get(name, name)} is required for this command")


def _parse_int_list(text: str | None, flag: str) -> list[int]:
    items = [s for s in (text or "").replace(" ", "").split(",") if s]
    if not items:
        raise ValueError(f"{flag} must be a non-empty comma-separated list")
    return [int(s) for s in items]


def _parse_float_list(text: str | None, flag: str) -> list[float]:
    items = [s for s in (text or "").replace(" ", "").split(",") if s]
    if not items:
        raise ValueError(f"{flag} must be a non-empty comma-separated list")
    return [float(s) for s in items]


def _load_inputs(cfg: RunConfig):
    docs = embedding_io.load_corpus(cfg.corpus_path, cfg.format)
    traces = embedding_io.load_power_traces(cfg.traces_path) if cfg.traces_path else None
    return docs, traces


# ---- subcommands -----------------------------------------------------------------

def cmd_validate(cfg: RunConfig) -> int:
    docs, traces = _load_inputs(cfg)
    if traces is not None:
        embedding_io.match_traces(docs, traces)
    total = sum(d.token_count for d in docs)
    print(f"OK: {len(docs)} documents, {total} tokens" + (f", {len(traces)} traces" if traces else ""))
    return 0


def cmd_fit(cfg: RunConfig) -> int:
    _require(cfg, "corpus_path", "output_path")
    docs, _ = _load_inputs(cfg)
    model = experts.fit_experts(
        docs,
        cfg.k,
        cfg.tau,
        seed=cfg.seed,
        max_iter=cfg.max_iter,
        tol=cfg.tol,
        beta=cfg.beta,
        gamma=cfg.gamma,
        temperature=cfg.temperature,
        fit_points=cfg.fit_points,
        binding_normalization=cfg.binding_normalization,
    )
    experts.save_model(model, cfg.output_path)
    stats = model.fit_stats
    print(
        f"fit k={model.k} dim={model.dim} tau={model.tau} "
        f"iterations={stats['iterations']} final_inertia={stats['final_inertia']:.9g}"
    )
    return 0


def cmd_segment(cfg: RunConfig) -> int:
    _require(cfg, "corpus_path", "output_path")
    docs, _ = _load_inputs(cfg)
    lines = []
    for doc in docs:
        seg = codon.assemble_codons(doc.embeddings, cfg.tau, cfg.binding_normalization)
        lines.append(json.dumps(codon.segmentation_record(doc.doc_id, cfg.tau, seg)))
        if cfg.heatmap_dir:
            out_dir = Path(cfg.heatmap_dir)
            out_dir.mkdir(parents=True, exist_ok=True)
            s = codon.similarity_matrix(doc.embeddings)
            codon.write_energy_csv(codon.semantic_energy(s), out_dir / f"{doc.doc_id}.csv")
    embedding_io.atomic_write_text(cfg.output_path, "\n".join(lines) + "\n")
    print(f"segmented {len(docs)} documents at tau={cfg.tau}")
    return 0


def cmd_route(cfg: RunConfig) -> int:
    _require(cfg, "corpus_path", "model_path", "output_path")
    docs, traces = _load_inputs(cfg)
    model = experts.load_model(cfg.model_path)
    start = time.perf_counter()
    outcomes = energy.route_corpus(
        docs,
        model,
        threads=cfg.route_threads,
        cohesion=cfg.cohesion,
        binding_normalization=cfg.binding_normalization,
        doc_embedding=cfg.doc_embedding,
    )
    elapsed = time.perf_counter() - start
    lines = [json.dumps(energy.outcome_record(o, cfg.verbose)) for o in outcomes]
    embedding_io.atomic_write_text(cfg.output_path, "\n".join(lines) + "\n")
    report = metrics.build_metrics_report(
        Path(cfg.corpus_path).stem, docs, outcomes, traces, wall_time_route_s=elapsed
    )
    metrics_path = cfg.metrics_path or str(Path(cfg.output_path).with_suffix("")) + ".metrics.json"
    embedding_io.atomic_write_text(metrics_path, metrics.metrics_report_json(report))
    print(
        f"routed {len(docs)} documents: mean_ssi={report.mean_ssi:.6f}"
        + (f" eud={report.eud_j_per_token:.9g} J/token" if report.eud_j_per_token is not None else "")
    )
    return 0


def cmd_ablate(cfg: RunConfig) -> int:
    _require(cfg, "corpus_path", "output_path")
    ks = _parse_int_list(cfg.k_list, "--k-list")
    taus = _parse_float_list(cfg.tau_list, "--tau-list")
    docs, traces = _load_inputs(cfg)
    rows = metrics.ablation_grid(
        docs,
        ks,
        taus,
        traces,
        seed=cfg.seed,
        route_threads=cfg.route_threads,
        fit_options=_fit_options(cfg),
        route_options=_route_options(cfg),
    )
    metrics.write_ablation_csv(rows, cfg.output_path)
    ok = sum(1 for r in rows if r["status"] == "ok")
    print(f"ablation: {ok}/{len(rows)} cells succeeded")
    return 0 if ok >= 1 else 1


def cmd_scaling(cfg: RunConfig) -> int:
    _require(cfg, "corpus_path", "output_path")
    ks = _parse_int_list(cfg.k_list, "--k-list")
    docs, traces = _load_inputs(cfg)
    points, fit = metrics.scaling_study(
        docs,
        ks,
        seed=cfg.seed,
        traces=traces,
        tau=cfg.tau,
        route_threads=cfg.route_threads,
        fit_options=_fit_options(cfg),
        route_options=_route_options(cfg),
    )
    metrics.write_scaling_csv(points, fit, cfg.output_path)
    print(f"scaling: {len(points)} points, fit b={fit['b']:.6g} r2={fit['r2']:.6g}")
    return 0


def _fit_options(cfg: RunConfig) -> dict:
    return {
        "max_iter": cfg.max_iter,
        "tol": cfg.tol,
        "beta": cfg.beta,
        "gamma": cfg.gamma,
        "temperature": cfg.temperature,
        "fit_points": cfg.fit_points,
        "binding_normalization": cfg.binding_normalization,
    }


def _route_options(cfg: RunConfig) -> dict:
    return {
        "cohesion": cfg.cohesion,
        "binding_normalization": cfg.binding_normalization,
        "doc_embedding": cfg.doc_embedding,
    }


_COMMANDS = {
    "validate": cmd_validate,
    "fit": cmd_fit,
    "segment": cmd_segment,
    "route": cmd_route,
    "ablate": cmd_ablate,
    "scaling": cmd_scaling,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args)
        if args.command == "validate":
            _require(cfg, "corpus_path")
        return _COMMANDS[args.command](cfg)
    except (SdnaError, ValueError) as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        if isinstance(e, ValueError) and "comma-separated list" in str(e):
            print(f"usage: sdna {args.command} --k-list K1,K2,... [options]", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2


if __name__ == "__main__":
    sys.exit(main())
