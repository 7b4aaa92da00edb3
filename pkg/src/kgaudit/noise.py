"""Benchmark noise generation: random, semantically-similar, adversarial.

Every noise triplet differs from a real source triplet in exactly one slot,
never duplicates a triplet already in the graph (or earlier noise), and is
deterministic for a fixed (graph, ratio, seed).  The semantically-similar
generator samples replacements from a softmax over description-embedding
dot products; the adversarial generator draws from the near-top tail
predictions of a TransE model trained on a shuffled split.

Dataset rows are ``head<TAB>relation<TAB>tail<TAB>label<TAB>kind`` with
label 1 marking noise.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .baselines import BaselineConfig, train_baseline
from .errors import ConfigError, DataError
from .kg import assemble_graph, read_entity_text, read_relation_text
from .vocab import word_tokens

_MAX_ATTEMPTS = 1000
NOISE_KINDS = ("random", "semantic", "adversarial")


@dataclass
class NoisyTriplet:
    triplet: tuple
    label: int            # 0 correct, 1 noisy
    kind: str             # none | random | semantic | adversarial
    source: tuple = None  # original triplet a noisy entry was derived from


@dataclass
class NoisyDataset:
    items: list
    ratio: float
    seed: int
    kind_mix: dict
    skipped_sources: int = 0
    adversarial_trace: list = field(default_factory=list)
    adversarial_models: list = field(default_factory=list)

    def triplets(self):
        return [it.triplet for it in self.items]

    def labels(self):
        return np.array([it.label for it in self.items], dtype=np.int64)

    def kinds(self):
        return [it.kind for it in self.items]

    def manifest(self):
        labels = self.labels()
        return {
            "ratio": self.ratio,
            "seed": self.seed,
            "kind_mix": dict(sorted(self.kind_mix.items())),
            "correct": int((labels == 0).sum()),
            "noisy": int((labels == 1).sum()),
            "skipped_sources": self.skipped_sources,
        }


def describe_embed(entity, dim=256):
    """Deterministic unit vector from a hashed bag of name+description tokens."""
    if dim < 8:
        raise ConfigError(f"embedding dim must be >= 8, got {dim}")
    vec = np.zeros(dim)
    for tok in word_tokens(entity.name + " " + entity.description):
        digest = hashlib.blake2b(tok.encode("utf-8"), digest_size=9).digest()
        bucket = int.from_bytes(digest[:8], "little") % dim
        vec[bucket] += 1.0 if digest[8] & 1 else -1.0
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        vec[0] = 1.0
        norm = 1.0
    return vec / norm


def hashed_embedder(dim=256):
    return lambda entity: describe_embed(entity, dim)


def semantic_probabilities(similarities):
    """Softmax turning candidate similarity scores into sampling weights."""
    s = np.asarray(similarities, dtype=np.float64)
    e = np.exp(s - s.max())
    return e / e.sum()


def draw_semantic_replacement(rng, anchor_vec, candidate_matrix):
    """Sample one candidate index with probability softmax(anchor . cand_i)."""
    probs = semantic_probabilities(candidate_matrix @ anchor_vec)
    return int(rng.choice(len(probs), p=probs))


def _target_count(kg, ratio, count):
    if count is not None:
        return int(count)
    if not 0.0 < ratio < 1.0:
        raise ConfigError(f"noise ratio must be in (0, 1), got {ratio}")
    return int(ratio * len(kg.triplets))


def _different(rng, n, current):
    if n < 2:
        return None
    v = int(rng.integers(0, n - 1))
    return v + 1 if v >= current else v


def _gen_random(kg, count, seed, existing):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        for _attempt in range(_MAX_ATTEMPTS):
            src = kg.triplets[int(rng.integers(len(kg.triplets)))]
            h, r, t = src
            slot = int(rng.integers(3))
            if slot == 0:
                nh = _different(rng, kg.n_entities, h)
                if nh is None or nh == t:
                    continue
                cand = (nh, r, t)
            elif slot == 1:
                nr = _different(rng, kg.n_relations, r)
                if nr is None:
                    continue
                cand = (h, nr, t)
            else:
                nt = _different(rng, kg.n_entities, t)
                if nt is None or nt == h:
                    continue
                cand = (h, r, nt)
            if cand in existing:
                continue
            existing.add(cand)
            out.append(NoisyTriplet(cand, 1, "random", src))
            break
        else:
            raise DataError(
                f"random noise: exhausted {_MAX_ATTEMPTS} attempts after "
                f"{len(out)} of {count} noises")
    return out


def _gen_semantic(kg, count, seed, existing, embedder):
    rng = np.random.default_rng(seed)
    embs = np.stack([embedder(e) for e in kg.entities])
    tails_by_rel = {r.id: np.array(kg.relation_tails(r.id)) for r in kg.relations}
    heads_by_rel = {r.id: np.array(kg.relation_heads(r.id)) for r in kg.relations}

    out = []
    skipped = 0
    for _ in range(count):
        for _attempt in range(_MAX_ATTEMPTS):
            src = kg.triplets[int(rng.integers(len(kg.triplets)))]
            h, r, t = src
            tail_side = rng.random() < 0.5
            pool, anchor = (tails_by_rel[r], t) if tail_side else (heads_by_rel[r], h)
            cands = pool[pool != anchor]
            if cands.size == 0:
                skipped += 1
                continue
            choice = draw_semantic_replacement(rng, embs[anchor], embs[cands])
            c = int(cands[choice])
            cand = (h, r, c) if tail_side else (c, r, t)
            if cand[0] == cand[2] or cand in existing:
                continue
            existing.add(cand)
            out.append(NoisyTriplet(cand, 1, "semantic", src))
            break
        else:
            raise DataError(
                f"semantic noise: exhausted {_MAX_ATTEMPTS} attempts after "
                f"{len(out)} of {count} noises ({skipped} sources skipped)")
    return out, skipped


def _gen_adversarial(kg, count, seed, existing, baseline_config, split_fraction,
                     max_rounds):
    if not 0.0 < split_fraction < 1.0:
        raise ConfigError(f"split fraction must be in (0, 1): {split_fraction}")
    cfg = baseline_config or BaselineConfig()
    seq = seed if isinstance(seed, np.random.SeedSequence) \
        else np.random.SeedSequence(seed)
    round_seeds = seq.spawn(max_rounds)
    out, trace, models = [], [], []
    for round_i in range(max_rounds):
        if len(out) >= count:
            break
        rng = np.random.default_rng(round_seeds[round_i])
        perm = rng.permutation(len(kg.triplets))
        n_train = min(max(1, int(split_fraction * len(perm))), len(perm) - 1)
        train = [kg.triplets[i] for i in perm[:n_train]]
        round_cfg = BaselineConfig(
            dim=cfg.dim, epochs=cfg.epochs, learning_rate=cfg.learning_rate,
            margin=cfg.margin, negatives=cfg.negatives, batch_size=cfg.batch_size,
            seed=int(round_seeds[round_i].generate_state(1)[0]))
        model = train_baseline(kg, "transe", round_cfg, triplets=train)
        models.append(model)
        for ti in perm[n_train:]:
            if len(out) >= count:
                break
            h, r, t = kg.triplets[ti]
            top10 = [int(e) for e in model.rank_all_tails(h, r)[:10]]
            cands = [e for e in top10
                     if e != t and e != h and (h, r, e) not in existing]
            if not cands:
                continue
            c = cands[int(rng.integers(len(cands)))]
            cand = (h, r, c)
            existing.add(cand)
            out.append(NoisyTriplet(cand, 1, "adversarial", (h, r, t)))
            trace.append({"round": round_i, "source": (h, r, t), "chosen": c})
    if len(out) < count:
        raise DataError(
            f"adversarial noise: reached {len(out)} of {count} after "
            f"{max_rounds} rounds")
    return out, trace, models


def _assemble(kg, noise_items, ratio, seed, kind_mix, skipped=0, trace=None,
              models=None):
    items = [NoisyTriplet(tr, 0, "none") for tr in kg.triplets] + list(noise_items)
    return NoisyDataset(items, ratio, seed, kind_mix, skipped,
                        trace or [], models or [])


def inject_random(kg, ratio, seed=0, count=None):
    target = _target_count(kg, ratio, count)
    noise = _gen_random(kg, target, seed, set(kg.triplet_set))
    return _assemble(kg, noise, ratio, seed, {"random": len(noise)})


def inject_semantic(kg, ratio, embedder=None, seed=0, count=None, dim=256):
    target = _target_count(kg, ratio, count)
    embedder = embedder or hashed_embedder(dim)
    noise, skipped = _gen_semantic(kg, target, seed, set(kg.triplet_set), embedder)
    return _assemble(kg, noise, ratio, seed, {"semantic": len(noise)},
                     skipped=skipped)


def inject_adversarial(kg, ratio, baseline_config=None, split_fraction=0.9,
                       seed=0, count=None, max_rounds=20):
    target = _target_count(kg, ratio, count)
    noise, trace, models = _gen_adversarial(
        kg, target, seed, set(kg.triplet_set), baseline_config, split_fraction,
        max_rounds)
    return _assemble(kg, noise, ratio, seed, {"adversarial": len(noise)},
                     trace=trace, models=models)


def inject_mixed(kg, ratio, seed=0, count=None, embedder=None, dim=256,
                 baseline_config=None, split_fraction=0.9, max_rounds=20):
    """All three kinds in (near-)equal quantities sharing one collision set."""
    total = _target_count(kg, ratio, count)
    base, rem = divmod(total, len(NOISE_KINDS))
    quotas = {k: base + (1 if i < rem else 0) for i, k in enumerate(NOISE_KINDS)}
    seeds = np.random.SeedSequence(seed).spawn(len(NOISE_KINDS))
    existing = set(kg.triplet_set)
    embedder = embedder or hashed_embedder(dim)
    noise = _gen_random(kg, quotas["random"], seeds[0], existing)
    sem, skipped = _gen_semantic(kg, quotas["semantic"], seeds[1], existing,
                                 embedder)
    adv, trace, models = _gen_adversarial(
        kg, quotas["adversarial"], seeds[2], existing, baseline_config,
        split_fraction, max_rounds)
    return _assemble(kg, noise + sem + adv, ratio, seed, quotas,
                     skipped=skipped, trace=trace, models=models)


INJECTORS = {
    "random": inject_random,
    "semantic": inject_semantic,
    "adversarial": inject_adversarial,
    "mixed": inject_mixed,
}


# ---------------------------------------------------------------------------
# dataset file I/O
# ---------------------------------------------------------------------------

def save_noisy_dataset(dataset, kg, path):
    with open(path, "w", encoding="utf-8") as f:
        for it in dataset.items:
            h, r, t = it.triplet
            f.write("\t".join([
                kg.entities[h].token, kg.relations[r].token, kg.entities[t].token,
                str(it.label), it.kind,
            ]) + "\n")


def save_manifest(dataset, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(dataset.manifest(), f, indent=2, sort_keys=True)
        f.write("\n")


def load_noisy_dataset(path, entity_text_path, relation_text_path):
    """Read a labeled dataset; returns (graph over all rows, labels, kinds).

    The graph contains every row's triplet (correct and noisy alike, in file
    order); labels and kinds align with ``kg.triplets``.
    """
    rows = []
    with open(path, encoding="utf-8") as f:
        for i, line in enumerate(f.read().splitlines(), start=1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 5:
                raise DataError(f"{path}:{i}: expected 5 fields, got {len(parts)}")
            if parts[3] not in ("0", "1"):
                raise DataError(f"{path}:{i}: label must be 0 or 1, got {parts[3]!r}")
            rows.append(parts)
    kg = assemble_graph([tuple(p[:3]) for p in rows],
                        read_entity_text(entity_text_path),
                        read_relation_text(relation_text_path), dedupe=False)
    labels = np.array([int(p[3]) for p in rows], dtype=np.int64)
    kinds = [p[4] for p in rows]
    return kg, labels, kinds
