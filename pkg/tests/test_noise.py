"""Noise generation: counts, distributions, soundness, determinism."""

import numpy as np
import pytest
from scipy import stats as sps

from kgaudit.baselines import BaselineConfig
from kgaudit.errors import ConfigError, DataError
from kgaudit.kg import Entity, KnowledgeGraph, Relation
from kgaudit.noise import (describe_embed, draw_semantic_replacement,
                           inject_adversarial, inject_mixed, inject_random,
                           inject_semantic, load_noisy_dataset,
                           save_noisy_dataset, semantic_probabilities)
from kgaudit.synth import make_synthetic_kg


def ring_kg(n_entities=20, n_relations=2):
    entities = [Entity(i, f"e{i}", f"node {i}", f"thing number {i}")
                for i in range(n_entities)]
    relations = [Relation(j, f"r{j}", f"rel {j}") for j in range(n_relations)]
    triplets = [(i, j, (i + 1 + j) % n_entities)
                for i in range(n_entities) for j in range(n_relations)]
    return KnowledgeGraph(entities, relations, triplets)


def changed_slots(noisy, source):
    return sum(a != b for a, b in zip(noisy, source))


class TestInjectRandom:
    def test_exact_count_from_ratio(self):
        kg = ring_kg(50, 1)  # 50 triplets... ring with 1 relation has 50
        kg = ring_kg(100, 1)
        ds = inject_random(kg, ratio=0.05, seed=0)
        assert ds.labels().sum() == 5
        assert ds.manifest()["noisy"] == 5
        assert ds.manifest()["correct"] == 100

    def test_noise_differs_in_exactly_one_slot(self):
        kg = ring_kg(30, 2)
        ds = inject_random(kg, ratio=0.2, seed=1)
        for it in ds.items:
            if it.label == 1:
                assert it.kind == "random"
                assert changed_slots(it.triplet, it.source) == 1
                assert it.triplet not in kg.triplet_set

    def test_no_duplicates_among_noise(self):
        kg = ring_kg(30, 2)
        ds = inject_random(kg, ratio=0.3, seed=2)
        noise = [it.triplet for it in ds.items if it.label == 1]
        assert len(set(noise)) == len(noise)

    def test_degenerate_graph_errors_after_resampling(self):
        entities = [Entity(0, "a", "a"), Entity(1, "b", "b")]
        relations = [Relation(0, "r", "r")]
        kg = KnowledgeGraph(entities, relations, [(0, 0, 1), (1, 0, 0)])
        with pytest.raises(DataError, match="attempts"):
            inject_random(kg, ratio=0.9, count=2, seed=3)

    def test_ratio_validation(self):
        with pytest.raises(ConfigError):
            inject_random(ring_kg(), ratio=1.5)

    def test_slot_choice_frequencies(self):
        # the graph must be large enough that no slot's corruption space is
        # meaningfully depleted by 30k noises (relation corruptions are the
        # scarcest: |triplets| * (|relations| - 1) candidates)
        kg = make_synthetic_kg(500, 12, 20_000, 5, seed=4)
        ds = inject_random(kg, ratio=0.5, count=30_000, seed=5)
        slots = np.zeros(3)
        for it in ds.items:
            if it.label == 0:
                continue
            h, r, t = it.triplet
            sh, sr, st = it.source
            if h != sh:
                slots[0] += 1
            elif r != sr:
                slots[1] += 1
            else:
                slots[2] += 1
        freq = slots / slots.sum()
        assert np.all(np.abs(freq - 1 / 3) <= 0.02), freq

    def test_deterministic(self):
        kg = ring_kg(40, 2)
        a = inject_random(kg, ratio=0.1, seed=6)
        b = inject_random(kg, ratio=0.1, seed=6)
        assert [it.triplet for it in a.items] == [it.triplet for it in b.items]


class TestDescribeEmbed:
    def test_identical_text_identical_vectors(self):
        a = Entity(0, "x", "same name", "same words here")
        b = Entity(1, "y", "same name", "same words here")
        va, vb = describe_embed(a, 64), describe_embed(b, 64)
        np.testing.assert_array_equal(va, vb)
        assert float(va @ vb) == pytest.approx(1.0, abs=1e-12)

    def test_unit_norm(self):
        rng = np.random.default_rng(0)
        for i in range(20):
            words = " ".join(f"w{rng.integers(1000)}" for _ in range(8))
            e = Entity(0, "t", f"name{i}", words)
            assert np.linalg.norm(describe_embed(e, 128)) == pytest.approx(
                1.0, abs=1e-12)

    def test_empty_description_uses_name(self):
        e = Entity(0, "t", "lonely", "")
        v = describe_embed(e, 64)
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-12)

    def test_dim_floor(self):
        with pytest.raises(ConfigError):
            describe_embed(Entity(0, "t", "n", "d"), dim=4)

    def test_disjoint_token_sets_near_orthogonal(self):
        rng = np.random.default_rng(1)
        sims = []
        for i in range(1000):
            wa = " ".join(f"a{rng.integers(10**6)}" for _ in range(6))
            wb = " ".join(f"b{rng.integers(10**6)}" for _ in range(6))
            va = describe_embed(Entity(0, "x", f"na{i}", wa), 256)
            vb = describe_embed(Entity(1, "y", f"nb{i}", wb), 256)
            sims.append(float(va @ vb))
        assert abs(np.mean(sims)) < 0.05


class TestSemanticSampler:
    def test_equal_embeddings_uniform(self):
        probs = semantic_probabilities([0.7, 0.7, 0.7, 0.7])
        np.testing.assert_allclose(probs, 0.25, atol=1e-15)

    def test_hand_evaluated_softmax(self):
        probs = semantic_probabilities([1.0, 0.0, -1.0])
        np.testing.assert_allclose(probs, [0.66524, 0.24473, 0.09003],
                                   atol=5e-6)

    def test_draws_match_distribution_chi_square(self):
        rng = np.random.default_rng(2)
        anchor = np.array([1.0, 0.0, 0.5])
        cands = np.array([[0.9, 0.1, 0.0], [-0.5, 0.5, 0.5], [0.0, 1.0, -0.2]])
        probs = semantic_probabilities(cands @ anchor)
        n = 10_000
        counts = np.zeros(3)
        for _ in range(n):
            counts[draw_semantic_replacement(rng, anchor, cands)] += 1
        _stat, p = sps.chisquare(counts, probs * n)
        assert p > 0.01


class TestInjectSemantic:
    def test_counts_and_one_slot_difference(self):
        kg = make_synthetic_kg(80, 5, 900, 4, seed=3)
        ds = inject_semantic(kg, ratio=0.05, seed=4)
        noise = [it for it in ds.items if it.label == 1]
        assert len(noise) == 45
        for it in noise:
            assert it.kind == "semantic"
            assert changed_slots(it.triplet, it.source) == 1
            assert it.triplet not in kg.triplet_set
            # the changed slot is an entity slot, never the relation
            assert it.triplet[1] == it.source[1]

    def test_replacement_comes_from_relation_pool(self):
        kg = make_synthetic_kg(80, 5, 900, 4, seed=5)
        ds = inject_semantic(kg, ratio=0.05, seed=6)
        for it in ds.items:
            if it.label == 0:
                continue
            h, r, t = it.triplet
            sh, sr, st = it.source
            if t != st:  # tail replaced: new tail must be a tail of r
                assert t in kg.relation_tails(r)
            else:  # head replaced
                assert h in kg.relation_heads(r)

    def test_single_candidate_relations_skipped(self):
        # relation 0 has a single tail entity; sources drawn from it must be
        # skipped and the target count still reached via relation 1
        entities = [Entity(i, f"e{i}", f"n{i}", f"desc {i}") for i in range(8)]
        relations = [Relation(0, "r0", "solo"), Relation(1, "r1", "multi")]
        triplets = [(0, 0, 7), (1, 0, 7), (2, 0, 7)]
        triplets += [(i, 1, (i + 1) % 6) for i in range(6)]
        kg = KnowledgeGraph(entities, relations, triplets)
        ds = inject_semantic(kg, ratio=0.5, count=4, seed=7)
        assert ds.labels().sum() == 4
        assert ds.skipped_sources >= 0

    def test_all_single_candidate_errors_with_achieved_count(self):
        entities = [Entity(i, f"e{i}", f"n{i}") for i in range(4)]
        relations = [Relation(0, "r0", "solo")]
        triplets = [(0, 0, 3), (1, 0, 3), (2, 0, 3)]
        kg = KnowledgeGraph(entities, relations, triplets)
        with pytest.raises(DataError, match="0 of 2"):
            inject_semantic(kg, ratio=0.5, count=2, seed=8)

    def test_deterministic(self):
        kg = make_synthetic_kg(60, 4, 600, 3, seed=9)
        a = inject_semantic(kg, ratio=0.1, seed=10)
        b = inject_semantic(kg, ratio=0.1, seed=10)
        assert [it.triplet for it in a.items] == [it.triplet for it in b.items]


@pytest.fixture(scope="module")
def adv():
    kg = make_synthetic_kg(30, 3, 400, 3, seed=11)
    cfg = BaselineConfig(dim=16, epochs=15, learning_rate=0.05, seed=0)
    ds = inject_adversarial(kg, ratio=0.1, baseline_config=cfg,
                            split_fraction=0.9, seed=12)
    return kg, ds


class TestInjectAdversarial:
    def test_target_count_reached(self, adv):
        kg, ds = adv
        assert ds.labels().sum() == 40

    def test_chosen_tail_in_recomputed_top10_and_never_true(self, adv):
        kg, ds = adv
        assert len(ds.adversarial_trace) == 40
        for rec in ds.adversarial_trace:
            model = ds.adversarial_models[rec["round"]]
            h, r, true_t = rec["source"]
            chosen = rec["chosen"]
            suspicion = model.suspicion_all_tails(h, r)
            top10 = set(int(e) for e in np.argsort(suspicion, kind="stable")[:10])
            assert chosen in top10
            assert chosen != true_t

    def test_noise_is_tail_corruption_only(self, adv):
        kg, ds = adv
        for it in ds.items:
            if it.label == 1:
                assert it.triplet[0] == it.source[0]
                assert it.triplet[1] == it.source[1]
                assert it.triplet[2] != it.source[2]
                assert it.triplet not in kg.triplet_set

    def test_shortfall_errors_with_achieved_count(self):
        kg = make_synthetic_kg(20, 2, 60, 2, seed=13)
        cfg = BaselineConfig(dim=8, epochs=2, seed=0)
        with pytest.raises(DataError, match="rounds"):
            inject_adversarial(kg, ratio=0.9, count=500, baseline_config=cfg,
                               seed=14, max_rounds=2)

    def test_split_fraction_validation(self):
        with pytest.raises(ConfigError):
            inject_adversarial(ring_kg(), 0.05, split_fraction=1.5)


class TestInjectMixed:
    def test_equal_quantities_within_one(self):
        kg = make_synthetic_kg(60, 4, 700, 3, seed=15)
        cfg = BaselineConfig(dim=8, epochs=10, seed=0)
        ds = inject_mixed(kg, ratio=0.05, seed=16, baseline_config=cfg)
        total = int(0.05 * 700)
        counts = ds.kind_mix
        assert sum(counts.values()) == total
        for kind, got in counts.items():
            assert abs(got - total / 3) <= 1.0, (kind, got)
        observed = {}
        for it in ds.items:
            if it.label == 1:
                observed[it.kind] = observed.get(it.kind, 0) + 1
        assert observed == counts


class TestDatasetIO:
    def test_roundtrip(self, tmp_path):
        kg = make_synthetic_kg(40, 3, 300, 3, seed=17)
        ds = inject_random(kg, ratio=0.1, seed=18)
        from kgaudit.kg import save_kg

        save_kg(kg, tmp_path / "t.tsv", tmp_path / "e.tsv", tmp_path / "r.tsv")
        save_noisy_dataset(ds, kg, tmp_path / "data.tsv")
        kg2, labels, kinds = load_noisy_dataset(
            tmp_path / "data.tsv", tmp_path / "e.tsv", tmp_path / "r.tsv")
        assert len(kg2.triplets) == len(ds.items)
        np.testing.assert_array_equal(labels, ds.labels())
        assert kinds == ds.kinds()
        # token-level identity of the triplets
        for item, (h, r, t) in zip(ds.items, kg2.triplets):
            ih, ir, it_ = item.triplet
            assert kg.entities[ih].token == kg2.entities[h].token
            assert kg.relations[ir].token == kg2.relations[r].token
            assert kg.entities[it_].token == kg2.entities[t].token

    def test_bad_label_rejected(self, tmp_path):
        (tmp_path / "bad.tsv").write_text("a\tr\tb\t2\tnone\n")
        (tmp_path / "e.tsv").write_text("a\ta\nb\tb\n")
        (tmp_path / "r.tsv").write_text("r\tr\n")
        with pytest.raises(DataError, match="label"):
            load_noisy_dataset(tmp_path / "bad.tsv", tmp_path / "e.tsv",
                               tmp_path / "r.tsv")

    def test_manifest_fields(self, tmp_path):
        kg = ring_kg(30, 1)
        ds = inject_random(kg, ratio=0.1, seed=19)
        save_manifest = __import__("kgaudit.noise", fromlist=["save_manifest"]).save_manifest
        save_manifest(ds, tmp_path / "m.json")
        import json

        doc = json.loads((tmp_path / "m.json").read_text())
        assert doc["noisy"] == 3
        assert doc["kind_mix"] == {"random": 3}
        assert doc["seed"] == 19
