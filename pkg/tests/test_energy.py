"""Routing energy: entropy, SSI, total-energy oracle, argmin selection."""

from __future__ import annotations

import math

import numpy as np
import pytest

import sdna
from sdna import codon, energy, experts

from oracles import oracle_entropy, oracle_softmax, planted_corpus


def fitted(seed=0, temperature=1.0, k=4, beta=0.1, gamma=0.01, cost_table=None):
    docs, labels = planted_corpus(32, 4, 8, 6, 0.05, seed=seed)
    model = experts.fit_experts(
        docs, k, 0.75, seed=0, temperature=temperature,
        beta=beta, gamma=gamma, cost_table=cost_table,
    )
    return docs, labels, model


# ---- entropy and SSI --------------------------------------------------------------

def test_entropy_matches_oracle():
    rng = np.random.default_rng(30)
    for trial in range(100):
        k = int(rng.integers(1, 9))
        raw = rng.uniform(0.01, 1.0, size=k)
        p = raw / raw.sum()
        assert energy.activation_entropy(p) == pytest.approx(oracle_entropy(p), abs=1e-12)


def test_entropy_handles_exact_zeros():
    p = np.array([0.5, 0.5, 0.0])
    assert energy.activation_entropy(p) == pytest.approx(math.log(2.0), abs=1e-12)


def test_entropy_known_value():
    p = np.array([0.5, 0.25, 0.25])
    assert energy.activation_entropy(p) == pytest.approx(1.0397207708399179, abs=1e-12)


def test_entropy_rejects_non_distribution():
    with pytest.raises(sdna.NotADistribution):
        energy.activation_entropy(np.array([0.7, 0.7]))
    with pytest.raises(sdna.NotADistribution):
        energy.activation_entropy(np.array([-0.1, 1.1]))
    with pytest.raises(sdna.NotADistribution):
        energy.activation_entropy(np.array([np.nan, 1.0]))


def test_ssi_bounds_one_hot_uniform():
    for k in (2, 3, 8, 50):
        one_hot = np.zeros(k)
        one_hot[0] = 1.0
        assert energy.ssi_from_entropy(energy.activation_entropy(one_hot), k) == pytest.approx(1.0, abs=1e-9)
        uniform = np.full(k, 1.0 / k)
        assert energy.ssi_from_entropy(energy.activation_entropy(uniform), k) == pytest.approx(0.0, abs=1e-9)


def test_ssi_single_expert_is_one():
    assert energy.ssi_from_entropy(0.0, 1) == 1.0


def test_ssi_always_in_unit_interval():
    rng = np.random.default_rng(31)
    for trial in range(200):
        k = int(rng.integers(2, 20))
        raw = rng.uniform(0.0, 1.0, size=k) + 1e-12
        p = raw / raw.sum()
        s = energy.ssi_from_entropy(energy.activation_entropy(p), k)
        assert 0.0 <= s <= 1.0


# ---- total energy against a loop oracle -------------------------------------------

def oracle_total_energy(doc, model, expert, cohesion="sum"):
    """Recompute E_total from primitive pieces with plain loops."""
    v = doc.embeddings.values.astype(np.float64)
    s = codon.similarity_matrix(doc.embeddings)
    seg = codon.assemble_codons(doc.embeddings, model.tau)
    forces = [codon.binding_force(s, c, "pair_mean") for c in seg.codons]
    coh = sum(1.0 - f for f in forces)
    if cohesion == "mean":
        coh /= len(forces)
    x = np.stack([c.embedding for c in seg.codons]).mean(axis=0)
    affs = []
    for c in model.centroids:
        affs.append(float(x @ c / (np.linalg.norm(x) * np.linalg.norm(c))))
    p = oracle_softmax(affs, model.temperature)
    h = oracle_entropy(p)
    return coh + (1.0 - affs[expert]) + model.beta * h + model.gamma * float(model.cost_table[expert])


def test_total_energy_matches_oracle():
    docs, _, model = fitted(seed=32)
    for doc in docs[:8]:
        for cohesion in energy.COHESION_MODES:
            out = energy.route(doc, model, cohesion=cohesion)
            for e in range(model.k):
                want = oracle_total_energy(doc, model, e, cohesion)
                assert out.energies[e] == pytest.approx(want, abs=1e-9)


def test_route_picks_argmin_with_lowest_index_ties():
    docs, _, model = fitted(seed=33)
    for doc in docs:
        out = energy.route(doc, model)
        assert out.chosen_expert == int(np.argmin(out.energies))
    # engineered tie: duplicate centroids -> equal energies -> expert 0
    c = np.stack([model.centroids[0], model.centroids[0]])
    twin = experts.ExpertModel(
        k=2, dim=model.dim, centroids=c, tau=model.tau, beta=model.beta,
        gamma=model.gamma, temperature=model.temperature,
        cost_table=np.zeros(2), seed=0, fit_stats={},
    )
    for doc in docs[:4]:
        out = energy.route(doc, twin)
        assert out.energies[0] == pytest.approx(out.energies[1], abs=1e-15)
        assert out.chosen_expert == 0


def test_gamma_cost_table_steers_routing():
    docs, _, model = fitted(seed=34)
    out0 = energy.route(docs[0], model)
    chosen = out0.chosen_expert
    # make the chosen expert expensive enough to lose the argmin
    cost = np.zeros(model.k)
    cost[chosen] = 1e6
    expensive = experts.ExpertModel(
        k=model.k, dim=model.dim, centroids=model.centroids, tau=model.tau,
        beta=model.beta, gamma=model.gamma, temperature=model.temperature,
        cost_table=cost, seed=model.seed, fit_stats={},
    )
    out1 = energy.route(docs[0], expensive)
    assert out1.chosen_expert != chosen


def test_beta_term_shifts_all_energies_equally():
    docs, _, model = fitted(seed=35, beta=0.0)
    hot = experts.ExpertModel(
        k=model.k, dim=model.dim, centroids=model.centroids, tau=model.tau,
        beta=0.7, gamma=model.gamma, temperature=model.temperature,
        cost_table=model.cost_table, seed=model.seed, fit_stats={},
    )
    for doc in docs[:6]:
        e0 = energy.route(doc, model)
        e1 = energy.route(doc, hot)
        diff = e1.energies - e0.energies
        assert np.allclose(diff, 0.7 * e0.entropy_h_a, atol=1e-12)
        assert e0.chosen_expert == e1.chosen_expert


def test_routing_scale_invariant():
    docs, _, model = fitted(seed=36)
    for doc in docs[:6]:
        base = energy.route(doc, model)
        for scale in (4.0, 0.25, 3.7):
            scaled_doc = sdna.CorpusDocument(
                doc.doc_id, sdna.EmbeddingMatrix(doc.embeddings.values * np.float32(scale))
            )
            out = energy.route(scaled_doc, model)
            assert out.chosen_expert == base.chosen_expert
            assert out.ssi == pytest.approx(base.ssi, abs=1e-5)


def test_route_rejects_dim_mismatch():
    docs, _, model = fitted(seed=37)
    bad = sdna.CorpusDocument("bad", sdna.EmbeddingMatrix(np.ones((3, model.dim + 1), dtype=np.float32)))
    with pytest.raises(sdna.DimMismatch):
        energy.route(bad, model)


def test_route_corpus_preserves_order_and_threads_agree():
    docs, _, model = fitted(seed=38)
    seq = energy.route_corpus(docs, model, threads=1)
    par = energy.route_corpus(docs, model, threads=4)
    assert [o.doc_id for o in seq] == [d.doc_id for d in docs]
    for a, b in zip(seq, par):
        assert a.doc_id == b.doc_id
        assert a.chosen_expert == b.chosen_expert
        assert (a.energies == b.energies).all()
        assert a.ssi == b.ssi


def test_token_mean_doc_embedding_mode():
    docs, _, model = fitted(seed=39)
    out = energy.route(docs[0], model, doc_embedding="token_mean")
    assert 0 <= out.chosen_expert < model.k
    with pytest.raises(ValueError):
        energy.route(docs[0], model, doc_embedding="median")


def test_outcome_record_fields():
    docs, _, model = fitted(seed=40)
    out = energy.route(docs[0], model)
    rec = energy.outcome_record(out)
    assert list(rec.keys()) == [
        "doc_id", "chosen_expert", "ssi", "h_a",
        "cohesion_term", "energies_min", "energies_max", "n_codons",
    ]
    assert rec["energies_min"] == pytest.approx(float(out.energies.min()))
    assert rec["energies_max"] == pytest.approx(float(out.energies.max()))
    verbose = energy.outcome_record(out, verbose=True)
    assert len(verbose["energies"]) == model.k
    assert len(verbose["p"]) == model.k


def test_single_expert_routes_everything_to_zero():
    docs, _, model = fitted(seed=41, k=1)
    outs = energy.route_corpus(docs, model)
    assert all(o.chosen_expert == 0 for o in outs)
    assert all(o.ssi == 1.0 for o in outs)


def test_total_energy_pinned_term_values():
    # two tokens whose cosine is exactly 0.7 merge into one codon at tau=-1
    rows = np.array([[1.0, 0.0], [0.7, math.sqrt(1.0 - 0.49)]], dtype=np.float64)
    emb = sdna.EmbeddingMatrix(rows.astype(np.float32))
    s = codon.similarity_matrix(emb)
    seg = codon.assemble_codons(emb, -1.0)
    assert len(seg.codons) == 1

    def model(gamma):
        return experts.ExpertModel(
            k=1, dim=2, centroids=np.array([[1.0, 0.0]]), tau=-1.0,
            beta=0.0, gamma=gamma, temperature=1.0,
            cost_table=np.array([2.0]), seed=0, fit_stats={},
        )

    p = np.array([1.0])
    e = energy.total_energy(seg, s, p, model(0.0), 0, affinity=0.9)
    assert e == pytest.approx(0.3 + 0.1, abs=1e-6)  # f32 row storage quantizes the pair cosine
    e = energy.total_energy(seg, s, p, model(0.01), 0, affinity=0.9)
    assert e == pytest.approx(0.4 + 0.02, abs=1e-6)
    # ground state: a single perfectly cohesive codon at unit affinity
    one = sdna.EmbeddingMatrix(np.array([[1.0, 0.0]], dtype=np.float32))
    seg1 = codon.assemble_codons(one, -1.0)
    s1 = codon.similarity_matrix(one)
    assert energy.total_energy(seg1, s1, p, model(0.0), 0, affinity=1.0) == 0.0


def test_uniform_cost_routes_to_argmax_affinity():
    docs, _, model = fitted(seed=44, cost_table=np.full(4, 1.5))
    for doc in docs:
        out = energy.route(doc, model)
        seg = codon.assemble_codons(doc.embeddings, model.tau)
        x = np.stack([c.embedding for c in seg.codons]).mean(axis=0)
        affs = experts.expert_affinity(x, model).values
        assert out.chosen_expert == int(np.argmax(affs))


def test_raising_a_loser_cost_never_steals_the_choice():
    docs, _, model = fitted(seed=45, gamma=0.05)
    for doc in docs[:10]:
        before = energy.route(doc, model)
        for j in range(model.k):
            if j == before.chosen_expert:
                continue
            bumped = np.asarray(model.cost_table).copy()
            bumped[j] += 5.0
            pricier = experts.ExpertModel(
                k=model.k, dim=model.dim, centroids=model.centroids,
                tau=model.tau, beta=model.beta, gamma=model.gamma,
                temperature=model.temperature, cost_table=bumped,
                seed=model.seed, fit_stats={},
            )
            after = energy.route(doc, pricier)
            assert after.chosen_expert == before.chosen_expert
            assert after.energies[j] > before.energies[j]


def test_doc_sitting_on_a_centroid_routes_to_it():
    eye = np.eye(8, dtype=np.float64)
    model = experts.ExpertModel(
        k=8, dim=8, centroids=eye, tau=0.75, beta=0.1, gamma=0.01,
        temperature=1.0, cost_table=np.ones(8), seed=0, fit_stats={},
    )
    rows = np.tile(eye[5].astype(np.float32), (3, 1))
    doc = sdna.CorpusDocument("on5", sdna.EmbeddingMatrix(rows))
    assert energy.route(doc, model).chosen_expert == 5
