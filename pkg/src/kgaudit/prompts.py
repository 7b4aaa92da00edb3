"""Masked prompt construction for the text and structure encoders.

Text prompt layouts (separator tokens are per-relation learned tokens):

  tail-masked:  [CLS] S1 <head entity+name> S2 <relation name> S3 [MASK] S4 <head description>
  head-masked:  [CLS] S1 [MASK] S2 <relation name> S3 <tail entity+name> S4 <tail description>

Structure prompt layouts (entity/relation learned tokens only):

  head-masked:  [CLS] [MASK] [SEP] [r] [SEP] [t] [SEP] <out-neighbor pairs of head>
  tail-masked:  [CLS] [h] [SEP] [r] [SEP] [MASK] [SEP] <in-neighbor pairs of head>

An entity name slot is the entity's learned token followed by its name word
pieces.  Every prompt carries exactly one mask token; the triplet being
reconstructed is excluded from its own neighbor sample.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DataError
from .kg import sample_neighbors
from .vocab import CLS, MASK, SEP, TEMPLATE_WORDS

# Caps keep the fixed skeleton of a prompt within any sane max length;
# only the trailing description segment is elastic.
NAME_PIECE_CAP = 8
RELATION_PIECE_CAP = 6


@dataclass
class PromptSequence:
    token_ids: list
    mask_position: int
    segment: str  # text-head | text-tail | struct-head | struct-tail | description
    triplet: tuple = None

    def __post_init__(self):
        if self.token_ids.count(MASK) != 1 or self.token_ids[self.mask_position] != MASK:
            raise DataError(
                f"prompt must contain exactly one mask at mask_position "
                f"(segment={self.segment})")

    def __len__(self):
        return len(self.token_ids)


def _entity_name_slot(vocab, kg, entity_id):
    ids = [vocab.entity_token(entity_id)]
    for w in _capped_words(kg.entities[entity_id].name, NAME_PIECE_CAP):
        ids.extend(vocab.encode_word(w))
    return ids[: 1 + NAME_PIECE_CAP]


def _relation_name_slot(vocab, kg, relation_id):
    ids = []
    for w in _capped_words(kg.relations[relation_id].name, RELATION_PIECE_CAP):
        ids.extend(vocab.encode_word(w))
    return ids[:RELATION_PIECE_CAP]


def _capped_words(text, cap):
    from .vocab import word_tokens

    return word_tokens(text)[:cap]


def _with_description(base_ids, mask_position, desc_text, vocab, max_len, segment,
                      triplet):
    if len(base_ids) > max_len:
        raise DataError(
            f"prompt skeleton length {len(base_ids)} exceeds max length {max_len}")
    room = max_len - len(base_ids)
    ids = base_ids + vocab.encode_text(desc_text)[:room]
    return PromptSequence(ids, mask_position, segment, triplet)


def build_text_prompts(triplet, kg, vocab, max_len):
    """Head-masked and tail-masked text prompts for one triplet."""
    h, r, t = triplet
    s1, s2, s3, s4 = (vocab.soft_sep(r, i) for i in range(1, 5))

    head_ids = [CLS, s1, MASK, s2, *_relation_name_slot(vocab, kg, r), s3,
                *_entity_name_slot(vocab, kg, t), s4]
    head_masked = _with_description(head_ids, 2, kg.entities[t].description,
                                    vocab, max_len, "text-head", triplet)

    tail_prefix = [CLS, s1, *_entity_name_slot(vocab, kg, h), s2,
                   *_relation_name_slot(vocab, kg, r), s3]
    tail_ids = tail_prefix + [MASK, s4]
    tail_masked = _with_description(tail_ids, len(tail_prefix),
                                    kg.entities[h].description, vocab, max_len,
                                    "text-tail", triplet)
    return head_masked, tail_masked


def build_struct_prompts(triplet, kg, vocab, neighbor_count, seed, max_len):
    """Head-masked and tail-masked structure prompts for one triplet.

    Both prompts draw context from the head entity's neighborhood: the
    head-masked prompt from its outgoing edges, the tail-masked prompt from
    its incoming edges.  Deterministic per seed.
    """
    h, r, t = triplet
    room = max(0, (max_len - 7) // 2)
    n = min(int(neighbor_count), room)

    def pair_ids(pairs):
        ids = []
        for e, rel in pairs:
            ids.append(vocab.entity_token(e))
            ids.append(vocab.relation_token(rel))
        return ids

    out_pairs = sample_neighbors(kg, h, "out", n, exclude=triplet, seed=seed)
    head_ids = [CLS, MASK, SEP, vocab.relation_token(r), SEP,
                vocab.entity_token(t), SEP] + pair_ids(out_pairs)
    head_masked = PromptSequence(head_ids, 1, "struct-head", triplet)

    in_pairs = sample_neighbors(kg, h, "in", n, exclude=triplet, seed=seed)
    tail_ids = [CLS, vocab.entity_token(h), SEP, vocab.relation_token(r), SEP,
                MASK, SEP] + pair_ids(in_pairs)
    tail_masked = PromptSequence(tail_ids, 5, "struct-tail", triplet)
    return head_masked, tail_masked


def build_description_prompt(entity, vocab, max_len):
    """Prompt used to initialize an entity's learned token from its text."""
    words = []
    for w in TEMPLATE_WORDS[:3]:  # "the description of"
        words.extend(vocab.encode_word(w))
    base = [CLS, *words, MASK, *vocab.encode_word(TEMPLATE_WORDS[3])]
    mask_position = base.index(MASK)
    return _with_description(base, mask_position, entity.description, vocab,
                             max_len, "description", None)
