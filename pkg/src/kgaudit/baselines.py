"""Embedding baselines: TransE, DistMult, ComplEx.

All scores are reported in a common suspicion orientation (higher = more
suspicious): the TransE translation distance as-is, the DistMult/ComplEx
plausibility negated.  TransE trains with a margin ranking loss and plain
SGD, renormalizing entity rows to unit L2 after every update; the bilinear
models train with a logistic loss and the shared AdamW optimizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .errors import ConfigError, NumericalError
from .optim import AdamW, sgd_step

KINDS = ("transe", "distmult", "complex")


@dataclass
class BaselineConfig:
    dim: int = 32
    epochs: int = 50
    learning_rate: float = 0.05
    margin: float = 1.0
    negatives: int = 1
    batch_size: int = 512
    seed: int = 0


@dataclass
class EmbeddingModel:
    kind: str
    dim: int
    params: dict
    loss_history: list = field(default_factory=list)

    def suspicion_score(self, h, r, t):
        """Suspicion of (h, r, t); accepts scalars or index arrays."""
        p = self.params
        if self.kind == "transe":
            v = p["entity"][h] + p["relation"][r] - p["entity"][t]
            return np.linalg.norm(v, axis=-1)
        if self.kind == "distmult":
            return -(p["entity"][h] * p["relation"][r] * p["entity"][t]).sum(axis=-1)
        hre, him = p["entity_re"][h], p["entity_im"][h]
        tre, tim = p["entity_re"][t], p["entity_im"][t]
        rre, rim = p["relation_re"][r], p["relation_im"][r]
        real = ((hre * tre + him * tim) * rre + (hre * tim - him * tre) * rim)
        return -real.sum(axis=-1)

    def suspicion_all_tails(self, h, r):
        """Suspicion of (h, r, e) for every entity e."""
        p = self.params
        if self.kind == "transe":
            target = p["entity"][h] + p["relation"][r]
            return np.linalg.norm(target - p["entity"], axis=-1)
        if self.kind == "distmult":
            return -(p["entity"] * (p["entity"][h] * p["relation"][r])).sum(axis=-1)
        hre, him = p["entity_re"][h], p["entity_im"][h]
        rre, rim = p["relation_re"][r], p["relation_im"][r]
        real = (p["entity_re"] * (hre * rre - him * rim)
                + p["entity_im"] * (him * rre + hre * rim))
        return -real.sum(axis=-1)

    def rank_all_tails(self, h, r):
        """Entity ids sorted most-plausible first; ties stable by id."""
        return np.argsort(self.suspicion_all_tails(h, r), kind="stable")


def baseline_score(model, h, r, t):
    return float(model.suspicion_score(h, r, t))


def _init_uniform(rng, shape, dim):
    bound = 6.0 / math.sqrt(dim)
    return rng.uniform(-bound, bound, size=shape)


def _renorm_rows(arr):
    norms = np.linalg.norm(arr, axis=1, keepdims=True)
    arr /= np.maximum(norms, 1e-12)


def _transe_distance_sq(ent, rel, h_idx, r_idx, t_idx):
    vh = T.embedding_lookup(ent, h_idx)
    vr = T.embedding_lookup(rel, r_idx)
    vt = T.embedding_lookup(ent, t_idx)
    d = T.add(T.add(vh, vr), T.scale(vt, -1.0))
    return T.tsum(T.multiply(d, d), axis=1)


def _bilinear_score(kind, params, h_idx, r_idx, t_idx):
    if kind == "distmult":
        vh = T.embedding_lookup(params["entity"], h_idx)
        vr = T.embedding_lookup(params["relation"], r_idx)
        vt = T.embedding_lookup(params["entity"], t_idx)
        return T.tsum(T.multiply(T.multiply(vh, vr), vt), axis=1)
    hre = T.embedding_lookup(params["entity_re"], h_idx)
    him = T.embedding_lookup(params["entity_im"], h_idx)
    tre = T.embedding_lookup(params["entity_re"], t_idx)
    tim = T.embedding_lookup(params["entity_im"], t_idx)
    rre = T.embedding_lookup(params["relation_re"], r_idx)
    rim = T.embedding_lookup(params["relation_im"], r_idx)
    sym = T.add(T.multiply(hre, tre), T.multiply(him, tim))
    skew = T.add(T.multiply(hre, tim), T.scale(T.multiply(him, tre), -1.0))
    return T.tsum(T.add(T.multiply(sym, rre), T.multiply(skew, rim)), axis=1)


def train_baseline(kg, kind, config, triplets=None):
    """Train one embedding model; deterministic per seed.

    ``triplets`` overrides the training set (used by the adversarial noise
    generator's train/test splits) while keeping the full entity catalog.
    """
    if kind not in KINDS:
        raise ConfigError(f"unknown baseline kind {kind!r}; expected one of {KINDS}")
    data = np.asarray(triplets if triplets is not None else kg.triplets,
                      dtype=np.int64)
    n_ent, n_rel, d = kg.n_entities, kg.n_relations, config.dim
    rng = np.random.default_rng(config.seed)

    if kind == "complex":
        params = {
            "entity_re": T.parameter(_init_uniform(rng, (n_ent, d), d)),
            "entity_im": T.parameter(_init_uniform(rng, (n_ent, d), d)),
            "relation_re": T.parameter(_init_uniform(rng, (n_rel, d), d)),
            "relation_im": T.parameter(_init_uniform(rng, (n_rel, d), d)),
        }
    else:
        params = {
            "entity": T.parameter(_init_uniform(rng, (n_ent, d), d)),
            "relation": T.parameter(_init_uniform(rng, (n_rel, d), d)),
        }
    if kind == "transe":
        _renorm_rows(params["entity"].values)
        _renorm_rows(params["relation"].values)

    batches_per_epoch = max(1, -(-len(data) // config.batch_size))
    opt = None
    if kind != "transe":
        opt = AdamW(peak_lr=config.learning_rate, warmup_steps=0,
                    total_steps=max(1, config.epochs * batches_per_epoch))

    model = EmbeddingModel(kind, d, {k: p.values for k, p in params.items()})

    for epoch in range(config.epochs):
        order = rng.permutation(len(data))
        epoch_loss = 0.0
        for start in range(0, len(data), config.batch_size):
            pos = data[order[start:start + config.batch_size]]
            reps = np.repeat(pos, config.negatives, axis=0)
            neg = reps.copy()
            corrupt_head = rng.random(len(neg)) < 0.5
            repl = rng.integers(0, n_ent, size=len(neg))
            neg[corrupt_head, 0] = repl[corrupt_head]
            neg[~corrupt_head, 2] = repl[~corrupt_head]

            if kind == "transe":
                dpos = _transe_distance_sq(params["entity"], params["relation"],
                                           pos[:, 0], pos[:, 1], pos[:, 2])
                dneg = _transe_distance_sq(params["entity"], params["relation"],
                                           neg[:, 0], neg[:, 1], neg[:, 2])
                dpos_rep = (dpos if config.negatives == 1 else T.reshape(
                    T.matmul(T.reshape(dpos, (len(pos), 1)),
                             T.constant(np.ones((1, config.negatives)))),
                    (len(neg),)))
                gap = T.add(T.add(dpos_rep, T.constant(np.full(len(neg), config.margin))),
                            T.scale(dneg, -1.0))
                loss = T.tsum(T.relu(gap))
            else:
                spos = _bilinear_score(kind, params, pos[:, 0], pos[:, 1], pos[:, 2])
                sneg = _bilinear_score(kind, params, neg[:, 0], neg[:, 1], neg[:, 2])
                loss = T.add(T.tsum(T.softplus(T.scale(spos, -1.0))),
                             T.tsum(T.softplus(sneg)))

            if not np.isfinite(loss.values):
                raise NumericalError(f"{kind} training diverged at epoch {epoch}")
            epoch_loss += float(loss.values)
            grad_map = T.backward(loss)
            grads = {name: grad_map[p] for name, p in params.items() if p in grad_map}
            if kind == "transe":
                sgd_step(params, grads, config.learning_rate)
                _renorm_rows(params["entity"].values)
            else:
                opt.step(params, grads)
            for p in params.values():
                p.zero_grad()
        model.loss_history.append(epoch_loss / len(data))
    return model
