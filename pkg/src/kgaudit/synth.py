"""Synthetic knowledge graphs with clustered text for desk-scale runs.

Entities belong to latent clusters; each relation links one source cluster
to one target cluster and every edge respects that pair.  Descriptions mix
a per-cluster vocabulary with per-entity trait words, and edges prefer
trait-compatible endpoint pairs, so the text carries both cluster-level and
entity-level signal.
"""

from __future__ import annotations

import numpy as np

from .errors import DataError
from .kg import Entity, KnowledgeGraph, Relation

_CLUSTER_WORDS = 16
_DESC_CLUSTER_WORDS = 6
_TRAIT_POOL = 24
_TRAITS_PER_ENTITY = 2
_TRAIT_AFFINITY = 3.0


def make_synthetic_kg(n_entities, n_relations, n_triplets, n_clusters, seed=0):
    """Deterministic clustered graph with generated entity descriptions."""
    if min(n_entities, n_relations, n_triplets, n_clusters) < 1:
        raise DataError("all synthetic counts must be positive")
    if n_entities < 2:
        raise DataError("need at least 2 entities")
    if n_triplets < 2 * n_relations:
        raise DataError(
            f"need at least {2 * n_relations} triplets to give every relation "
            f"two distinct tails, got {n_triplets}")
    max_edges = n_entities * (n_entities - 1) * n_relations
    if n_triplets > max_edges:
        raise DataError(
            f"{n_triplets} triplets requested but only {max_edges} distinct "
            f"non-loop edges exist")

    rng = np.random.default_rng(seed)
    clusters = rng.integers(0, n_clusters, size=n_entities)
    members = [np.flatnonzero(clusters == c) for c in range(n_clusters)]
    # every cluster needs at least one member for relation endpoints
    for c in range(n_clusters):
        if len(members[c]) == 0:
            clusters[rng.integers(n_entities)] = c
            members = [np.flatnonzero(clusters == cc) for cc in range(n_clusters)]

    trait_words = [f"trait{k}" for k in range(_TRAIT_POOL)]
    traits = [rng.choice(_TRAIT_POOL, size=_TRAITS_PER_ENTITY, replace=False)
              for _ in range(n_entities)]

    entities = []
    for i in range(n_entities):
        c = int(clusters[i])
        pool = [f"c{c}w{k}" for k in range(_CLUSTER_WORDS)]
        picks = rng.choice(_CLUSTER_WORDS, size=_DESC_CLUSTER_WORDS, replace=False)
        words = [pool[int(k)] for k in picks] + [trait_words[int(k)] for k in traits[i]]
        rng.shuffle(words)
        entities.append(Entity(i, f"e{i}", f"ent{i}", " ".join(words)))

    relations = []
    rel_clusters = []
    for j in range(n_relations):
        src = int(rng.integers(n_clusters))
        dst = int(rng.integers(n_clusters))
        while src == dst and len(members[src]) < 2:
            dst = int(rng.integers(n_clusters))  # single member: only self-loops
        rel_clusters.append((src, dst))
        relations.append(Relation(j, f"r{j}", f"rel{j} link"))

    trait_sets = [set(int(x) for x in t) for t in traits]
    triplets = []
    seen = set()

    def add(h, r, t):
        if h == t or (h, r, t) in seen:
            return False
        seen.add((h, r, t))
        triplets.append((h, r, t))
        return True

    def weighted_tail(h, pool):
        weights = np.array([1.0 + _TRAIT_AFFINITY * len(trait_sets[h] & trait_sets[int(t)])
                            for t in pool])
        return int(pool[int(rng.choice(len(pool), p=weights / weights.sum()))])

    # Seed every relation with two edges having distinct heads and tails so the
    # semantic-noise candidate sets are never degenerate.
    for j in range(n_relations):
        src, dst = rel_clusters[j]
        placed_tails = set()
        placed_heads = set()
        guard = 0
        while len(placed_tails) < 2:
            guard += 1
            if guard > 10000:
                raise DataError(f"cannot seed relation {j} with two distinct tails")
            h = int(rng.choice(members[src]))
            t = int(rng.choice(members[dst])) if len(members[dst]) >= 2 else int(
                rng.integers(n_entities))
            if t in placed_tails or h in placed_heads:
                # force variety even in tiny clusters
                t = int(rng.integers(n_entities))
                h = int(rng.integers(n_entities))
            if t in placed_tails or h in placed_heads:
                continue
            if add(h, j, t):
                placed_tails.add(t)
                placed_heads.add(h)

    # Every generated edge respects its relation's cluster pair: a benchmark
    # whose true edges were drawn like the uniform noise being detected would
    # cap achievable precision at noise/(noise+background).
    guard = 0
    while len(triplets) < n_triplets:
        guard += 1
        if guard > 200 * n_triplets:
            raise DataError(
                f"triplet generation stalled at {len(triplets)} of {n_triplets}")
        r = int(rng.integers(n_relations))
        src, dst = rel_clusters[r]
        h = int(rng.choice(members[src]))
        t = weighted_tail(h, members[dst])
        add(h, r, t)

    return KnowledgeGraph(entities, relations, triplets)
