"""Dual-view error detector and its training loop.

One model bundle holds a text encoder and a structure encoder.  Training
minimizes confidence-weighted reconstruction plus cross-view contrastive
loss; every refresh period the model re-scores all triplets in evaluation
mode, fuses the scores into suspicion ranks, and reassigns the per-triplet
confidences that weight subsequent epochs.  Single-view variants
("struct-only", "text-only") train the corresponding encoder alone with
reconstruction only.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .encoder import EncoderConfig, MaskedEncoder
from .errors import ConfigError, DataError, NumericalError
from .fusion import ConfidenceTable, build_confidence_table
from .losses import (HyperParams, contrastive_loss_graph, draw_corruptions,
                     reconstruction_loss_graph)
from .optim import AdamW
from .prompts import build_struct_prompts, build_text_prompts
from .vocab import build_vocabulary

VARIANTS = ("full", "struct-only", "text-only")

_EVAL_EPOCH = 0  # reserved epoch index for evaluation-mode neighbor sampling


@dataclass
class OptimizerSettings:
    peak_lr: float = 2e-3
    warmup_fraction: float = 0.1
    weight_decay: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.warmup_fraction <= 1.0:
            raise ConfigError(
                f"warmup_fraction must be in [0, 1]: {self.warmup_fraction}")


@dataclass
class DatasetPaths:
    dataset: str
    entities: str
    relations: str


@dataclass
class RunConfig:
    dataset: DatasetPaths = None
    hyper: HyperParams = field(default_factory=HyperParams)
    text_encoder: EncoderConfig = field(default_factory=lambda: EncoderConfig(
        layers=4, heads=4, width=128, ff_width=256, max_len=64))
    struct_encoder: EncoderConfig = field(default_factory=lambda: EncoderConfig(
        layers=2, heads=4, width=128, ff_width=256, max_len=32, neighbor_count=8))
    projection_dim: int = 32
    epochs: int = 5
    batch_size: int = 64
    refresh_period: int = 1
    optimizer: OptimizerSettings = field(default_factory=OptimizerSettings)
    eval_k: list = field(default_factory=lambda: [0.01, 0.05])
    seed: int = 0
    variant: str = "full"
    out_dir: str = "run"
    max_words: int = 8192

    def __post_init__(self):
        if self.refresh_period < 1:
            raise ConfigError(f"refresh_period must be >= 1: {self.refresh_period}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs must be >= 0 and batch_size >= 1")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}: {self.variant!r}")
        for k in self.eval_k:
            if not 0.0 < k <= 1.0:
                raise ConfigError(f"eval K values must be in (0, 1]: {k}")


def _sub_config(cls, data, where):
    if isinstance(data, cls):
        return data
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {unknown}")
    return cls(**data)


def config_from_dict(data):
    """Build a RunConfig from a parsed JSON document; unknown keys rejected."""
    if not isinstance(data, dict):
        raise ConfigError("run config must be a JSON object")
    names = {f.name for f in dataclasses.fields(RunConfig)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"unknown keys in run config: {unknown}")
    kwargs = dict(data)
    for key, cls in (("dataset", DatasetPaths), ("hyper", HyperParams),
                     ("text_encoder", EncoderConfig),
                     ("struct_encoder", EncoderConfig),
                     ("optimizer", OptimizerSettings)):
        if key in kwargs and kwargs[key] is not None:
            kwargs[key] = _sub_config(cls, kwargs[key], key)
    return RunConfig(**kwargs)


def _neighbor_seed(base_seed, epoch, triplet_id):
    return ((base_seed * 1_000_003 + epoch) * 1_000_003 + triplet_id) % (2 ** 63)


class DualViewDetector:
    """Trains on an (unlabeled) graph and ranks its triplets by suspicion."""

    def __init__(self, config):
        self.config = config
        self.kg = None
        self.vocab = None
        self.text_enc = None
        self.struct_enc = None
        self.named_params = {}
        self.metrics = []
        self.history = []
        self.confidences = None
        self.final_table = None

    # -- sklearn-flavored surface ------------------------------------------

    def get_params(self):
        return dataclasses.asdict(self.config)

    @property
    def uses_text(self):
        return self.config.variant in ("full", "text-only")

    @property
    def uses_struct(self):
        return self.config.variant in ("full", "struct-only")

    def prepare(self, kg, pretrain=True):
        """Build vocabulary and randomly initialized encoders for a graph."""
        cfg = self.config
        self.kg = kg
        self.vocab = build_vocabulary(kg, cfg.max_words)
        self.named_params = {}
        if self.uses_text:
            self.text_enc = MaskedEncoder(self.vocab, cfg.text_encoder,
                                          cfg.projection_dim)
            if pretrain:
                self.text_enc.pretrain_entity_tokens(kg)
            for name, p in self.text_enc.params.items():
                self.named_params[f"text.{name}"] = p
        if self.uses_struct:
            self.struct_enc = MaskedEncoder(self.vocab, cfg.struct_encoder,
                                            cfg.projection_dim)
            for name, p in self.struct_enc.params.items():
                self.named_params[f"struct.{name}"] = p
        return self

    # -- forward passes -----------------------------------------------------

    def _text_ce(self, triplets, train, rng):
        cfg = self.config
        head_prompts, tail_prompts = [], []
        for tr in triplets:
            ph, pt = build_text_prompts(tr, self.kg, self.vocab,
                                        cfg.text_encoder.max_len)
            head_prompts.append(ph)
            tail_prompts.append(pt)
        heads = np.array([tr[0] for tr in triplets])
        tails = np.array([tr[2] for tr in triplets])
        head_emb = self.text_enc.forward_batch(head_prompts, train=train, rng=rng)
        tail_emb = self.text_enc.forward_batch(tail_prompts, train=train, rng=rng)
        ce_head = T.cross_entropy_with_logits(self.text_enc.entity_logits(head_emb),
                                              heads)
        ce_tail = T.cross_entropy_with_logits(self.text_enc.entity_logits(tail_emb),
                                              tails)
        return ce_head, ce_tail, head_emb, tail_emb

    def _struct_ce(self, triplets, triplet_ids, epoch, train, rng):
        cfg = self.config
        head_prompts, tail_prompts = [], []
        for tr, tid in zip(triplets, triplet_ids):
            seed = _neighbor_seed(cfg.seed, epoch, int(tid))
            ph, pt = build_struct_prompts(tr, self.kg, self.vocab,
                                          cfg.struct_encoder.neighbor_count,
                                          seed, cfg.struct_encoder.max_len)
            head_prompts.append(ph)
            tail_prompts.append(pt)
        heads = np.array([tr[0] for tr in triplets])
        tails = np.array([tr[2] for tr in triplets])
        head_emb = self.struct_enc.forward_batch(head_prompts, train=train, rng=rng)
        tail_emb = self.struct_enc.forward_batch(tail_prompts, train=train, rng=rng)
        ce_head = T.cross_entropy_with_logits(
            self.struct_enc.entity_logits(head_emb), heads)
        ce_tail = T.cross_entropy_with_logits(
            self.struct_enc.entity_logits(tail_emb), tails)
        return ce_head, ce_tail, head_emb, tail_emb

    # -- training -----------------------------------------------------------

    def fit(self, kg):
        """Train on all triplets of a graph; returns self."""
        cfg = self.config
        self.prepare(kg)
        n = len(kg.triplets)
        triplet_ids = np.arange(n)
        confidences = np.ones(n)
        steps_per_epoch = max(1, -(-n // cfg.batch_size))
        total_steps = max(1, cfg.epochs * steps_per_epoch)
        opt = AdamW(cfg.optimizer.peak_lr,
                    int(round(cfg.optimizer.warmup_fraction * total_steps)),
                    total_steps, cfg.optimizer.weight_decay)
        seq = np.random.SeedSequence(cfg.seed)
        rng_order, rng_corrupt, rng_dropout = (np.random.default_rng(s)
                                               for s in seq.spawn(3))
        self.metrics = []
        self.history = []
        refresh_count = 0
        alpha = cfg.hyper.alpha if cfg.variant == "full" else (
            1.0 if cfg.variant == "text-only" else 0.0)

        for epoch in range(1, cfg.epochs + 1):
            order = rng_order.permutation(n)
            ep_text = ep_struct = ep_contr = 0.0
            for start in range(0, n, cfg.batch_size):
                bidx = order[start:start + cfg.batch_size]
                triplets = [kg.triplets[i] for i in bidx]
                conf = confidences[bidx]
                zero = T.constant(np.zeros(len(bidx)))
                if self.uses_text:
                    ce_th, ce_tt, emb_th, emb_tt = self._text_ce(
                        triplets, True, rng_dropout)
                else:
                    ce_th = ce_tt = zero
                if self.uses_struct:
                    ce_sh, ce_st, emb_sh, emb_st = self._struct_ce(
                        triplets, bidx, epoch, True, rng_dropout)
                else:
                    ce_sh = ce_st = zero
                loss, l_text, l_struct = reconstruction_loss_graph(
                    ce_th, ce_tt, ce_sh, ce_st, conf, alpha)
                if cfg.variant == "full":
                    coin, other = draw_corruptions(len(bidx),
                                                   cfg.hyper.x_negatives,
                                                   rng_corrupt)
                    l_contr, _ = contrastive_loss_graph(
                        self.text_enc.project(emb_th),
                        self.text_enc.project(emb_tt),
                        self.struct_enc.project(emb_sh),
                        self.struct_enc.project(emb_st),
                        coin, other, conf)
                    loss = T.add(loss, l_contr)
                    ep_contr += float(l_contr.values)
                total = T.scale(loss, 1.0 / len(bidx))
                if not np.isfinite(total.values):
                    raise NumericalError(
                        f"training loss diverged at epoch {epoch}, "
                        f"batch {start // cfg.batch_size}")
                grad_map = T.backward(total)
                grads = {name: grad_map[p] for name, p in self.named_params.items()
                         if p in grad_map}
                opt.step(self.named_params, grads)
                for p in self.named_params.values():
                    p.zero_grad()
                ep_text += float(l_text.values)
                ep_struct += float(l_struct.values)
            self.metrics.append({
                "epoch": epoch,
                "loss_text": ep_text / n,
                "loss_struct": ep_struct / n,
                "loss_contrastive": ep_contr / n,
            })
            if epoch % cfg.refresh_period == 0:
                refresh_count += 1
                table = self.confidence_table(refresh_index=refresh_count)
                confidences = table.confidence.copy()
                self.history.append(table)

        self.confidences = confidences
        if self.history:
            self.final_table = self.history[-1]
        else:
            table = self.confidence_table(refresh_index=0)
            table.confidence = np.ones(n)
            self.final_table = table
        return self

    # -- scoring and detection ----------------------------------------------

    def score_triplets(self, triplets=None, ids=None, chunk=128):
        """Evaluation-mode scores: (text CE sum, struct CE sum, contrastive sim)."""
        if triplets is None:
            triplets = self.kg.triplets
            ids = np.arange(len(triplets))
        elif ids is None:
            ids = np.arange(len(triplets))
        n = len(triplets)
        s_text = np.zeros(n)
        s_struct = np.zeros(n)
        s_contr = np.zeros(n) if self.config.variant == "full" else None
        for start in range(0, n, chunk):
            part = triplets[start:start + chunk]
            part_ids = ids[start:start + chunk]
            if self.uses_text:
                ce_th, ce_tt, emb_th, emb_tt = self._text_ce(part, False, None)
                s_text[start:start + chunk] = ce_th.values + ce_tt.values
            if self.uses_struct:
                ce_sh, ce_st, emb_sh, emb_st = self._struct_ce(
                    part, part_ids, _EVAL_EPOCH, False, None)
                s_struct[start:start + chunk] = ce_sh.values + ce_st.values
            if s_contr is not None:
                sims = T.cosine_similarity(self.text_enc.project(emb_th),
                                           self.struct_enc.project(emb_st))
                s_contr[start:start + chunk] = sims.values
        return s_text, s_struct, s_contr

    def confidence_table(self, refresh_index=0):
        """Score every triplet and fuse into ranks and confidences."""
        s_text, s_struct, s_contr = self.score_triplets()
        label_seed = np.random.SeedSequence(
            (self.config.seed, 0x5EED, refresh_index))
        return build_confidence_table(self.kg.triplets, s_text, s_struct, s_contr,
                                      self.config.hyper, label_seed)

    def detect(self):
        """Fresh evaluation-mode ranking; deterministic for a trained bundle."""
        return self.confidence_table(refresh_index=0)

    # -- persistence ---------------------------------------------------------

    def parameter_arrays(self):
        return {name: p.values for name, p in self.named_params.items()}

    def load_parameter_arrays(self, arrays):
        for name, p in self.named_params.items():
            if name not in arrays:
                raise DataError(f"checkpoint missing parameter {name!r}")
            if arrays[name].shape != p.values.shape:
                raise DataError(
                    f"checkpoint shape mismatch for {name!r}: "
                    f"{arrays[name].shape} vs {p.values.shape}")
            p.values[...] = arrays[name]
        return self
