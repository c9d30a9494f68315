"""Acceptance gate: one test per release criterion, each with a runtime bound.

Fixture constants below were frozen against hand calculations before the
implementation existed; see the assertions for the expected values.
"""

from __future__ import annotations

import json
import subprocess
import sys
import time

import numpy as np

import sdna
from sdna import codon, energy, experts, metrics

from oracles import (
    best_label_match,
    constant_trace_rows,
    oracle_log_fit,
    oracle_segment,
    planted_corpus,
    write_trace_csv,
)


def test_acceptance_metric_formula_fixtures():
    """200 constant-power traces reproduce EUD = 0.000835 J/token.

    Each doc draws 42.95 W for one 0.07 s sample: E_d = 3.0065 J,
    total 601.3 J.  Token counts 120 docs x 3601 + 80 docs x 3600
    = 720120 tokens, so EUD = 601.3 / 720120 = 0.00083499972...
    """
    start = time.perf_counter()
    traces = [
        sdna.PowerTrace(f"doc{i:04d}", 0.07, np.array([42.95]))
        for i in range(200)
    ]
    token_counts = [3601] * 120 + [3600] * 80
    per_doc = []
    for tr, t_d in zip(traces, token_counts):
        e_d = metrics.document_energy(tr)
        assert abs(e_d - 42.95 * 0.07) / (42.95 * 0.07) < 1e-9
        rho = metrics.energy_density(e_d, t_d)
        assert abs(rho - e_d / t_d) < 1e-15
        per_doc.append((e_d, t_d))
    eud = metrics.corpus_eud(per_doc)
    assert abs(eud - 0.000835) < 1e-6
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    print("ACCEPTANCE metric_formula_fixtures: PASS")


def test_acceptance_scaling_fit_reproduction():
    """Published-style (k, ssi) quadruple fits a + b ln k with r2 >= 0.97.

    Closed-form least squares on these four points gives
    a = -0.05231798, b = 0.10794790, r2 = 0.99903425; the fit under
    test must agree and clear the thresholds.
    """
    start = time.perf_counter()
    ks = [100, 500, 1024, 2048]
    ssis = [0.4462, 0.6184, 0.6901, 0.7753]
    fit = metrics.fit_log_curve(ks, ssis)
    a, b, r2 = oracle_log_fit(ks, ssis)
    assert abs(fit["a"] - a) < 1e-10
    assert abs(fit["b"] - b) < 1e-10
    assert abs(fit["r2"] - r2) < 1e-10
    assert fit["b"] > 0.0
    assert fit["r2"] >= 0.97
    assert abs(fit["r2"] - 0.999034254) < 1e-6
    elapsed = time.perf_counter() - start
    assert elapsed < 1.0
    print("ACCEPTANCE scaling_fit_reproduction: PASS")


def test_acceptance_codon_oracle_equivalence():
    """1000 random sequences, n <= 12: segmentation matches the loop oracle."""
    start = time.perf_counter()
    rng = np.random.default_rng(2026)
    for trial in range(1000):
        n = int(rng.integers(1, 13))
        dim = int(rng.integers(2, 9))
        m = sdna.EmbeddingMatrix(rng.normal(size=(n, dim)).astype(np.float32))
        tau = float(rng.uniform(-1.0, 1.0))
        seg = codon.assemble_codons(m, tau)
        assert seg.spans == oracle_segment(m.values.astype(np.float64), tau)
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    print("ACCEPTANCE codon_oracle_equivalence: PASS")


def test_acceptance_force_separation():
    """Planted two-cluster sequences: binding beats non-binding by > 0.5."""
    start = time.perf_counter()
    rng = np.random.default_rng(77)
    wins = 0
    for trial in range(100):
        dim = int(rng.integers(6, 17))
        n1 = int(rng.integers(2, 6))
        n2 = int(rng.integers(2, 6))
        axes = rng.permutation(dim)[:2]
        a = np.zeros(dim)
        a[axes[0]] = 1.0
        b = np.zeros(dim)
        b[axes[1]] = 1.0
        pts = np.concatenate([
            a + rng.normal(scale=0.05, size=(n1, dim)),
            b + rng.normal(scale=0.05, size=(n2, dim)),
        ])
        m = sdna.EmbeddingMatrix(pts.astype(np.float32))
        s = codon.similarity_matrix(m)
        v = m.values.astype(np.float64)
        ca = codon.Codon(0, n1 - 1, v[:n1].mean(axis=0), 0.0)
        cb = codon.Codon(n1, n1 + n2 - 1, v[n1:].mean(axis=0), 0.0)
        f_a = codon.binding_force(s, ca, "pair_mean")
        f_b = codon.binding_force(s, cb, "pair_mean")
        f_non = codon.non_binding_force(s, ca, cb)
        if min(f_a, f_b) - f_non > 0.5:
            wins += 1
    assert wins == 100
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    print("ACCEPTANCE force_separation: PASS")


def test_acceptance_routing_recovery():
    """64 docs on 4 orthogonal directions: >= 63 recovered, mean SSI >= 0.95."""
    start = time.perf_counter()
    docs, labels = planted_corpus(64, 4, 16, 6, 0.05, seed=7)
    model = experts.fit_experts(docs, 4, 0.75, seed=0, temperature=0.1)
    outs = energy.route_corpus(docs, model)
    chosen = [o.chosen_expert for o in outs]
    assert best_label_match(chosen, labels, 4) >= 63
    mean_ssi = metrics.aggregate_ssi(outs)
    assert mean_ssi >= 0.95
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    print("ACCEPTANCE routing_recovery: PASS")


def test_acceptance_desk_scale_scaling_law():
    """512 docs over 64 planted directions: SSI non-decreasing in k, b > 0."""
    start = time.perf_counter()
    docs, _ = planted_corpus(512, 64, 64, 6, 0.05, seed=7)
    points, fit = metrics.scaling_study(
        docs, [4, 8, 16, 32, 64], seed=0,
        fit_options={"temperature": 0.1},
    )
    ssis = [p.ssi for p in points]
    for earlier, later in zip(ssis, ssis[1:]):
        assert later >= earlier - 1e-12, f"SSI decreased: {ssis}"
    assert fit["b"] > 0.0
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    print("ACCEPTANCE desk_scale_scaling_law: PASS")


# ---- invariant suites, one test each so every suite gets its own verdict -----------

def test_acceptance_invariants_ssi():
    start = time.perf_counter()
    for k in (2, 3, 8, 50, 512):
        one_hot = np.zeros(k)
        one_hot[k // 2] = 1.0
        s1 = energy.ssi_from_entropy(energy.activation_entropy(one_hot), k)
        assert abs(s1 - 1.0) <= 1e-9
        uniform = np.full(k, 1.0 / k)
        s0 = energy.ssi_from_entropy(energy.activation_entropy(uniform), k)
        assert abs(s0) <= 1e-9
    rng = np.random.default_rng(88)
    for trial in range(500):
        k = int(rng.integers(2, 40))
        raw = rng.uniform(0, 1, size=k) + 1e-15
        p = raw / raw.sum()
        s = energy.ssi_from_entropy(energy.activation_entropy(p), k)
        assert 0.0 <= s <= 1.0
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    print("ACCEPTANCE invariants_ssi: PASS")


def test_acceptance_invariants_tau_monotonicity():
    start = time.perf_counter()
    rng = np.random.default_rng(89)
    for trial in range(100):
        n = int(rng.integers(2, 16))
        m = sdna.EmbeddingMatrix(rng.normal(size=(n, 8)).astype(np.float32))
        taus = np.sort(rng.uniform(-1, 1, size=6))
        counts = [len(codon.assemble_codons(m, float(t)).codons) for t in taus]
        assert counts == sorted(counts)
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    print("ACCEPTANCE invariants_tau_monotonicity: PASS")


def test_acceptance_invariants_scale_invariance():
    start = time.perf_counter()
    docs, _ = planted_corpus(16, 4, 8, 6, 0.05, seed=90)
    model = experts.fit_experts(docs, 4, 0.75, seed=0, temperature=0.1)
    rng = np.random.default_rng(91)
    for doc in docs:
        base_spans = codon.assemble_codons(doc.embeddings, 0.75).spans
        base_route = energy.route(doc, model).chosen_expert
        for scale in (4.0, 0.25, 3.7, float(rng.uniform(0.01, 50.0))):
            scaled = sdna.CorpusDocument(
                doc.doc_id,
                sdna.EmbeddingMatrix(doc.embeddings.values * np.float32(scale)),
            )
            assert codon.assemble_codons(scaled.embeddings, 0.75).spans == base_spans
            assert energy.route(scaled, model).chosen_expert == base_route
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    print("ACCEPTANCE invariants_scale_invariance: PASS")


def test_acceptance_invariants_kmeans_inertia():
    start = time.perf_counter()
    for seed in (0, 1, 2, 3, 4):
        docs, _ = planted_corpus(60, 6, 10, 5, 0.3, seed=seed)
        model = experts.fit_experts(docs, 6, 0.5, seed=seed)
        hist = model.fit_stats["inertia_history"]
        for earlier, later in zip(hist, hist[1:]):
            assert later <= earlier + 1e-9
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    print("ACCEPTANCE invariants_kmeans_inertia: PASS")


def test_acceptance_invariants_cli_determinism(tmp_path):
    start = time.perf_counter()
    docs, _ = planted_corpus(24, 4, 8, 6, 0.05, seed=92)
    corpus = tmp_path / "c.sdna"
    sdna.write_corpus(docs, corpus, "binary")

    def cli(*args):
        r = subprocess.run(
            [sys.executable, "-m", "sdna.cli", *args],
            capture_output=True, text=True,
        )
        assert r.returncode == 0, r.stderr
        return r

    m1, m2 = tmp_path / "m1.json", tmp_path / "m2.json"
    for m in (m1, m2):
        cli("fit", "--corpus", str(corpus), "--out", str(m), "--k", "4", "--seed", "3")
    assert m1.read_bytes() == m2.read_bytes()

    r1, r2 = tmp_path / "r1.jsonl", tmp_path / "r2.jsonl"
    for rp in (r1, r2):
        cli("route", "--corpus", str(corpus), "--model", str(m1), "--out", str(rp))
    assert r1.read_bytes() == r2.read_bytes()
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    print("ACCEPTANCE invariants_cli_determinism: PASS")
