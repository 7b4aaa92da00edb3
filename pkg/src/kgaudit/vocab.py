"""Token vocabulary shared by both sequence encoders.

Id layout: four fixed specials (0-3), then four adjustable separator tokens
per relation (contiguous blocks), then one learned token per entity, one per
relation, then word tokens.  Words come from lowercased whitespace/alnum
splitting with a frequency cap; words that miss the cap fall back to
single-character pieces.
"""

from __future__ import annotations

import re
from collections import Counter

from .errors import DataError

PAD, CLS, SEP, MASK = 0, 1, 2, 3
SOFT_SEPS_PER_RELATION = 4

# Words of the description pre-training template are always in vocabulary.
TEMPLATE_WORDS = ("the", "description", "of", "is")

_WORD_RE = re.compile(r"[a-z0-9]+")


def word_tokens(text):
    """Lowercased alphanumeric word list."""
    return _WORD_RE.findall(text.lower())


class Vocabulary:
    def __init__(self, n_entities, n_relations, words, pieces):
        self.n_entities = n_entities
        self.n_relations = n_relations
        self.soft_sep_base = 4
        self.entity_base = self.soft_sep_base + SOFT_SEPS_PER_RELATION * n_relations
        self.relation_base = self.entity_base + n_entities
        self.word_base = self.relation_base + n_relations
        self.word_ids = {w: self.word_base + i for i, w in enumerate(words)}
        piece_base = self.word_base + len(words)
        self.piece_ids = {p: piece_base + i for i, p in enumerate(pieces)}
        self.size = piece_base + len(pieces)

    def soft_sep(self, relation_id, slot):
        """Separator token ``slot`` (1-4) of a relation."""
        if not 1 <= slot <= SOFT_SEPS_PER_RELATION:
            raise DataError(f"soft separator slot out of range: {slot}")
        return self.soft_sep_base + SOFT_SEPS_PER_RELATION * relation_id + (slot - 1)

    def entity_token(self, entity_id):
        return self.entity_base + entity_id

    def relation_token(self, relation_id):
        return self.relation_base + relation_id

    def entity_token_ids(self):
        return list(range(self.entity_base, self.entity_base + self.n_entities))

    def encode_word(self, word):
        wid = self.word_ids.get(word)
        if wid is not None:
            return [wid]
        return [self.piece_ids[c] for c in word if c in self.piece_ids]

    def encode_text(self, text):
        ids = []
        for w in word_tokens(text):
            ids.extend(self.encode_word(w))
        return ids

    def token_strings(self):
        """All token surface forms indexed by id (for the vocabulary file)."""
        names = [""] * self.size
        names[PAD], names[CLS], names[SEP], names[MASK] = "[PAD]", "[CLS]", "[SEP]", "[MASK]"
        for r in range(self.n_relations):
            for slot in range(1, SOFT_SEPS_PER_RELATION + 1):
                names[self.soft_sep(r, slot)] = f"[SEP{slot}#{r}]"
        for e in range(self.n_entities):
            names[self.entity_token(e)] = f"[E#{e}]"
        for r in range(self.n_relations):
            names[self.relation_token(r)] = f"[R#{r}]"
        for w, i in self.word_ids.items():
            names[i] = w
        for p, i in self.piece_ids.items():
            names[i] = f"##{p}"
        return names

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            for i, token in enumerate(self.token_strings()):
                f.write(f"{token}\t{i}\n")


def build_vocabulary(kg, max_words=8192):
    """Deterministic vocabulary over a graph's names and descriptions."""
    counts = Counter()
    chars = set("abcdefghijklmnopqrstuvwxyz0123456789")
    for e in kg.entities:
        for w in word_tokens(e.name) + word_tokens(e.description):
            counts[w] += 1
            chars.update(w)
    for r in kg.relations:
        for w in word_tokens(r.name):
            counts[w] += 1
            chars.update(w)
    for w in TEMPLATE_WORDS:
        counts[w] += 1
        chars.update(w)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    words = [w for w, _ in ranked[:max_words]]
    pieces = sorted(chars)
    return Vocabulary(kg.n_entities, kg.n_relations, words, pieces)
