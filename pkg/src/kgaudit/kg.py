"""Knowledge-graph loading, indexing, and validation.

File formats (UTF-8, tab separated):
  triplets:  ``head<TAB>relation<TAB>tail`` raw tokens, one per line
  entities:  ``token<TAB>name<TAB>description`` (description optional)
  relations: ``token<TAB>name``

Graphs are immutable after load and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


@dataclass
class Entity:
    id: int
    token: str
    name: str
    description: str = ""


@dataclass
class Relation:
    id: int
    token: str
    name: str


@dataclass
class LoadReport:
    """Counts of anomalies tolerated while loading."""
    dropped_text_entities: int = 0
    dropped_text_relations: int = 0
    missing_text_entities: int = 0
    missing_text_relations: int = 0
    duplicate_triplets: int = 0


class KnowledgeGraph:
    """Entity/relation catalogs, the triplet set, and both adjacency indexes.

    ``in_index[e]`` holds pairs ``(h', r')`` with ``(h', r', e)`` in the
    triplet set; ``out_index[e]`` holds ``(t', r')`` with ``(e, r', t')``.
    Degree counts each triplet once per endpoint, so the average degree is
    ``2 * len(triplets) / len(entities)``.
    """

    def __init__(self, entities, relations, triplets, report=None):
        self.entities = list(entities)
        self.relations = list(relations)
        self.triplets = list(triplets)
        self.report = report or LoadReport()
        seen = set()
        n = len(self.entities)
        for i, (h, r, t) in enumerate(self.triplets):
            if not (0 <= h < n and 0 <= t < n and 0 <= r < len(self.relations)):
                raise DataError(f"triplet {i} references unknown ids: {(h, r, t)}")
            if (h, r, t) in seen:
                raise DataError(f"duplicate triplet in graph: {(h, r, t)}")
            seen.add((h, r, t))
        self.triplet_set = seen
        self.in_index = [[] for _ in range(n)]
        self.out_index = [[] for _ in range(n)]
        for h, r, t in self.triplets:
            self.out_index[h].append((t, r))
            self.in_index[t].append((h, r))
        for rows in (self.in_index, self.out_index):
            for pairs in rows:
                pairs.sort()

    @property
    def n_entities(self):
        return len(self.entities)

    @property
    def n_relations(self):
        return len(self.relations)

    def degree(self, entity_id):
        return len(self.in_index[entity_id]) + len(self.out_index[entity_id])

    def relation_tails(self, relation_id):
        """Sorted distinct tail entities observed with a relation."""
        return sorted({t for h, r, t in self.triplets if r == relation_id})

    def relation_heads(self, relation_id):
        return sorted({h for h, r, t in self.triplets if r == relation_id})


def _read_lines(path):
    with open(path, encoding="utf-8") as f:
        return f.read().splitlines()


def read_entity_text(path):
    """Parse an entity text file into {token: (name, description)}."""
    out = {}
    for i, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) not in (2, 3):
            raise DataError(f"{path}:{i}: expected 2-3 fields, got {len(parts)}")
        token, name = parts[0], parts[1]
        if not name:
            raise DataError(f"{path}:{i}: empty entity name for {token!r}")
        out[token] = (name, parts[2] if len(parts) == 3 else "")
    return out


def read_relation_text(path):
    """Parse a relation text file into {token: name}."""
    out = {}
    for i, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}:{i}: expected 2 fields, got {len(parts)}")
        out[parts[0]] = parts[1]
    return out


def assemble_graph(triplet_rows, entity_text, relation_text, dedupe=True):
    """Build an indexed graph from (head, relation, tail) token rows.

    Ids are dense, assigned by first appearance in the rows.  Tokens missing
    from the text maps become entities/relations named after the raw token;
    text entries never referenced by a row are dropped.  All anomalies are
    counted in the returned graph's ``report``.
    """
    report = LoadReport()
    entities, relations = [], []
    entity_ids, relation_ids = {}, {}
    triplets = []
    seen = set()

    def entity_id(token):
        eid = entity_ids.get(token)
        if eid is None:
            eid = len(entities)
            entity_ids[token] = eid
            if token in entity_text:
                name, desc = entity_text[token]
            else:
                name, desc = token, ""
                report.missing_text_entities += 1
            entities.append(Entity(eid, token, name, desc))
        return eid

    def relation_id(token):
        rid = relation_ids.get(token)
        if rid is None:
            rid = len(relations)
            relation_ids[token] = rid
            if token in relation_text:
                name = relation_text[token]
            else:
                name = token
                report.missing_text_relations += 1
            relations.append(Relation(rid, token, name))
        return rid

    for h_tok, r_tok, t_tok in triplet_rows:
        h, r, t = entity_id(h_tok), relation_id(r_tok), entity_id(t_tok)
        if (h, r, t) in seen:
            if not dedupe:
                raise DataError(f"duplicate triplet {(h_tok, r_tok, t_tok)}")
            report.duplicate_triplets += 1
            continue
        seen.add((h, r, t))
        triplets.append((h, r, t))

    report.dropped_text_entities = len(set(entity_text) - set(entity_ids))
    report.dropped_text_relations = len(set(relation_text) - set(relation_ids))
    return KnowledgeGraph(entities, relations, triplets, report)


def load_kg(triplet_path, entity_text_path, relation_text_path):
    """Load and index a graph; anomaly counts land in ``kg.report``.

    Entities/relations present only in the text files are dropped (counted);
    triplet tokens absent from the text files become entities named after
    the raw token with an empty description (counted).
    """
    rows = []
    for i, line in enumerate(_read_lines(triplet_path), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise DataError(f"{triplet_path}:{i}: expected 3 fields, got {len(parts)}")
        rows.append(tuple(parts))
    return assemble_graph(rows, read_entity_text(entity_text_path),
                          read_relation_text(relation_text_path))


def save_kg(kg, triplet_path, entity_text_path, relation_text_path):
    with open(triplet_path, "w", encoding="utf-8") as f:
        for h, r, t in kg.triplets:
            f.write(f"{kg.entities[h].token}\t{kg.relations[r].token}\t{kg.entities[t].token}\n")
    with open(entity_text_path, "w", encoding="utf-8") as f:
        for e in kg.entities:
            f.write(f"{e.token}\t{e.name}\t{e.description}\n")
    with open(relation_text_path, "w", encoding="utf-8") as f:
        for r in kg.relations:
            f.write(f"{r.token}\t{r.name}\n")


def sample_neighbors(kg, entity_id, direction, max_n, exclude=None, seed=0):
    """Uniform sample without replacement from one neighbor set.

    ``direction`` is ``"in"`` or ``"out"``.  ``exclude`` removes the pair
    contributed by one specific triplet (the one being reconstructed).
    Deterministic for a fixed seed; order is seed-determined.
    """
    if direction == "in":
        pool = kg.in_index[entity_id]
        skip = (exclude[0], exclude[1]) if exclude is not None and exclude[2] == entity_id else None
    elif direction == "out":
        pool = kg.out_index[entity_id]
        skip = (exclude[2], exclude[1]) if exclude is not None and exclude[0] == entity_id else None
    else:
        raise DataError(f"direction must be 'in' or 'out', got {direction!r}")
    if skip is not None:
        pool = [p for p in pool if p != skip]
    if not pool or max_n <= 0:
        return []
    rng = np.random.default_rng(seed)
    k = min(int(max_n), len(pool))
    picks = rng.choice(len(pool), size=k, replace=False)
    return [pool[int(i)] for i in picks]


def stats(kg):
    n_ent = kg.n_entities
    avg = 2.0 * len(kg.triplets) / n_ent if n_ent else 0.0
    return {
        "entities": n_ent,
        "relations": kg.n_relations,
        "triplets": len(kg.triplets),
        "average_degree": avg,
    }
