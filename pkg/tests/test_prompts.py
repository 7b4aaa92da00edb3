"""Vocabulary layout and prompt construction."""

import numpy as np
import pytest

from kgaudit.errors import DataError
from kgaudit.kg import Entity, KnowledgeGraph, Relation, sample_neighbors
from kgaudit.prompts import (build_description_prompt, build_struct_prompts,
                             build_text_prompts)
from kgaudit.vocab import CLS, MASK, PAD, SEP, Vocabulary, build_vocabulary


@pytest.fixture
def small_kg():
    entities = [
        Entity(0, "e0", "sun star", "bright yellow star in the sky"),
        Entity(1, "e1", "moon", "grey rock orbiting the planet"),
        Entity(2, "e2", "earth", "blue planet full of water"),
        Entity(3, "e3", "mars", ""),
        Entity(4, "e4", "venus", "hot cloudy planet near the sun"),
    ]
    relations = [Relation(0, "r0", "orbits"), Relation(1, "r1", "shines on")]
    triplets = [(1, 0, 2), (2, 0, 0), (4, 0, 0), (0, 1, 2), (0, 1, 1), (3, 0, 0)]
    return KnowledgeGraph(entities, relations, triplets)


class TestVocabulary:
    def test_special_tokens_fixed(self, small_kg):
        v = build_vocabulary(small_kg)
        assert (PAD, CLS, SEP, MASK) == (0, 1, 2, 3)

    def test_soft_separators_contiguous_per_relation(self, small_kg):
        v = build_vocabulary(small_kg)
        for r in range(2):
            ids = [v.soft_sep(r, i) for i in range(1, 5)]
            assert ids == list(range(ids[0], ids[0] + 4))
        assert v.soft_sep(0, 1) == 4
        assert v.soft_sep(1, 1) == 8

    def test_ids_dense_and_distinct(self, small_kg):
        v = build_vocabulary(small_kg)
        names = v.token_strings()
        assert len(names) == v.size
        assert all(n for n in names)
        assert len(set(names)) == v.size

    def test_word_fallback_to_pieces(self, small_kg):
        v = build_vocabulary(small_kg)
        ids = v.encode_word("zzzq")  # never in the corpus
        assert len(ids) == 4
        assert all(i >= v.word_base for i in ids)

    def test_frequency_cap(self, small_kg):
        v = build_vocabulary(small_kg, max_words=3)
        assert len(v.word_ids) == 3
        # "planet" occurs three times, "the" three times: both survive the cap
        assert "planet" in v.word_ids

    def test_save_format(self, small_kg, tmp_path):
        v = build_vocabulary(small_kg)
        path = tmp_path / "vocab.tsv"
        v.save(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "[PAD]\t0"
        assert len(lines) == v.size


class TestTextPrompts:
    def test_hand_constructed_layout_with_truncation(self, small_kg):
        v = build_vocabulary(small_kg)
        triplet = (1, 0, 2)  # moon orbits earth
        max_len = 16
        head_masked, tail_masked = build_text_prompts(triplet, small_kg, v, max_len)

        s1, s2, s3, s4 = (v.soft_sep(0, i) for i in range(1, 5))
        w = lambda word: v.word_ids[word]
        # head-masked: [CLS] S1 [MASK] S2 orbits S3 [E2] earth S4 + tail desc
        expected = [CLS, s1, MASK, s2, w("orbits"), s3, v.entity_token(2),
                    w("earth"), s4]
        desc = [w("blue"), w("planet"), w("full"), w("of"), w("water")]
        room = max_len - len(expected)
        assert head_masked.token_ids == expected + desc[:room]
        assert len(head_masked.token_ids) <= max_len
        assert head_masked.mask_position == 2

        # tail-masked: [CLS] S1 [E1] moon S2 orbits S3 [MASK] S4 + head desc
        expected_t = [CLS, s1, v.entity_token(1), w("moon"), s2, w("orbits"),
                      s3, MASK, s4]
        desc_h = [w("grey"), w("rock"), w("orbiting"), w("the"), w("planet")]
        room_t = max_len - len(expected_t)
        assert tail_masked.token_ids == expected_t + desc_h[:room_t]
        assert tail_masked.mask_position == 7

    def test_empty_description_ends_at_fourth_separator(self, small_kg):
        v = build_vocabulary(small_kg)
        _, tail_masked = build_text_prompts((3, 0, 0), small_kg, v, 32)
        assert tail_masked.token_ids[-1] == v.soft_sep(0, 4)

    def test_exactly_one_mask_between_first_separators(self, small_kg):
        v = build_vocabulary(small_kg)
        for triplet in small_kg.triplets:
            head_masked, _ = build_text_prompts(triplet, small_kg, v, 48)
            ids = head_masked.token_ids
            assert ids.count(MASK) == 1
            r = triplet[1]
            pos = ids.index(MASK)
            assert ids[pos - 1] == v.soft_sep(r, 1)
            assert ids[pos + 1] == v.soft_sep(r, 2)

    def test_no_label_leakage(self, small_kg):
        v = build_vocabulary(small_kg)
        for triplet in small_kg.triplets:
            h, r, t = triplet
            head_masked, tail_masked = build_text_prompts(triplet, small_kg, v, 48)
            assert v.entity_token(h) not in head_masked.token_ids
            assert v.entity_token(t) not in tail_masked.token_ids

    def test_skeleton_overflow_rejected(self, small_kg):
        v = build_vocabulary(small_kg)
        with pytest.raises(DataError, match="max length"):
            build_text_prompts((1, 0, 2), small_kg, v, 6)


class TestStructPrompts:
    def test_no_neighbors_ends_after_third_sep(self, small_kg):
        v = build_vocabulary(small_kg)
        # head 3 (mars) has no in-neighbors: tail-masked prompt is bare
        _, tail_masked = build_struct_prompts((3, 0, 0), small_kg, v, 4, 0, 32)
        assert tail_masked.token_ids == [CLS, v.entity_token(3), SEP,
                                         v.relation_token(0), SEP, MASK, SEP]

    def test_zero_neighbor_count_is_bare_sequence(self, small_kg):
        v = build_vocabulary(small_kg)
        head_masked, tail_masked = build_struct_prompts((2, 0, 0), small_kg, v,
                                                        0, 0, 32)
        assert head_masked.token_ids == [CLS, MASK, SEP, v.relation_token(0),
                                         SEP, v.entity_token(0), SEP]
        assert len(tail_masked.token_ids) == 7

    def test_pairs_match_sampler_output(self, small_kg):
        v = build_vocabulary(small_kg)
        triplet = (0, 1, 2)  # head 0 has out-edges and in-edges
        seed = 123
        head_masked, tail_masked = build_struct_prompts(triplet, small_kg, v, 2,
                                                        seed, 32)
        out_pairs = sample_neighbors(small_kg, 0, "out", 2, exclude=triplet,
                                     seed=seed)
        expect = []
        for e, r in out_pairs:
            expect += [v.entity_token(e), v.relation_token(r)]
        assert head_masked.token_ids[7:] == expect
        in_pairs = sample_neighbors(small_kg, 0, "in", 2, exclude=triplet,
                                    seed=seed)
        expect_in = []
        for e, r in in_pairs:
            expect_in += [v.entity_token(e), v.relation_token(r)]
        assert tail_masked.token_ids[7:] == expect_in

    def test_target_triplet_excluded_from_context(self, small_kg):
        v = build_vocabulary(small_kg)
        triplet = (0, 1, 2)
        for seed in range(40):
            head_masked, _ = build_struct_prompts(triplet, small_kg, v, 5, seed, 48)
            pairs = head_masked.token_ids[7:]
            pair_list = [(pairs[i], pairs[i + 1]) for i in range(0, len(pairs), 2)]
            assert (v.entity_token(2), v.relation_token(1)) not in pair_list

    def test_deterministic_per_seed(self, small_kg):
        v = build_vocabulary(small_kg)
        a = build_struct_prompts((0, 1, 2), small_kg, v, 3, 7, 32)
        b = build_struct_prompts((0, 1, 2), small_kg, v, 3, 7, 32)
        assert a[0].token_ids == b[0].token_ids
        assert a[1].token_ids == b[1].token_ids


class TestDescriptionPrompt:
    def test_template_layout(self, small_kg):
        v = build_vocabulary(small_kg)
        p = build_description_prompt(small_kg.entities[1], v, 32)
        w = lambda word: v.word_ids[word]
        assert p.token_ids[:6] == [CLS, w("the"), w("description"), w("of"),
                                   MASK, w("is")]
        assert p.mask_position == 4
        assert p.token_ids[6:] == v.encode_text("grey rock orbiting the planet")

    def test_truncates_description(self, small_kg):
        v = build_vocabulary(small_kg)
        p = build_description_prompt(small_kg.entities[0], v, 8)
        assert len(p.token_ids) == 8
