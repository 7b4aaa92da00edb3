"""Small trained-from-scratch masked sequence encoders.

Both the text encoder and the structure encoder share this architecture:
a pre-norm transformer encoder with learned positional embeddings, a
reconstruction head (two-layer perceptron whose output is dotted against
all entity token embeddings), and a linear projection into the shared
contrastive space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ConfigError, ShapeError
from .prompts import build_description_prompt

_ATTN_MASKED = -1e9


@dataclass
class EncoderConfig:
    layers: int = 2
    heads: int = 4
    width: int = 64
    ff_width: int = 128
    max_len: int = 32
    neighbor_count: int = 4
    dropout: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.width % self.heads != 0:
            raise ConfigError(
                f"width {self.width} not divisible by heads {self.heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1): {self.dropout}")


class MaskedEncoder:
    """Transformer encoder producing mask-position embeddings.

    Parameters live in ``self.params`` (name -> Tensor); initialization is
    normal(0, 0.02) from the config seed, layer-norm gains 1 and biases 0.
    """

    def __init__(self, vocab, config, proj_dim):
        self.vocab = vocab
        self.config = config
        self.proj_dim = proj_dim
        rng = np.random.default_rng(config.seed)
        d, f = config.width, config.ff_width
        dh = d // config.heads
        p = {}

        def mat(name, shape):
            p[name] = T.parameter(rng.normal(0.0, 0.02, size=shape))

        mat("tok_emb", (vocab.size, d))
        mat("pos_emb", (config.max_len, d))
        for i in range(config.layers):
            p[f"l{i}.ln1.g"] = T.parameter(np.ones(d))
            p[f"l{i}.ln1.b"] = T.parameter(np.zeros(d))
            for j in range(config.heads):
                mat(f"l{i}.h{j}.wq", (d, dh))
                mat(f"l{i}.h{j}.wk", (d, dh))
                mat(f"l{i}.h{j}.wv", (d, dh))
            mat(f"l{i}.wo", (d, d))
            p[f"l{i}.ln2.g"] = T.parameter(np.ones(d))
            p[f"l{i}.ln2.b"] = T.parameter(np.zeros(d))
            mat(f"l{i}.w1", (d, f))
            mat(f"l{i}.w2", (f, d))
        p["final_ln.g"] = T.parameter(np.ones(d))
        p["final_ln.b"] = T.parameter(np.zeros(d))
        mat("head.w1", (d, d))
        mat("head.w2", (d, d))
        mat("proj", (d, proj_dim))
        self.params = p

    # -- forward ----------------------------------------------------------

    def _dropout(self, x, train, rng):
        p = self.config.dropout
        if not train or p <= 0.0 or rng is None:
            return x
        keep = (rng.random(x.shape) >= p).astype(np.float64) / (1.0 - p)
        return T.multiply(x, T.constant(keep))

    def forward_batch(self, prompts, train=False, rng=None):
        """Mask-position embeddings for a batch of prompts, shape (B, width)."""
        cfg = self.config
        lengths = [len(pr) for pr in prompts]
        if max(lengths) > cfg.max_len:
            raise ShapeError(
                f"prompt length {max(lengths)} exceeds encoder max {cfg.max_len}")
        b, seq = len(prompts), max(lengths)
        ids = np.zeros((b, seq), dtype=np.int64)
        mask_flat = np.zeros(b, dtype=np.int64)
        bias = np.zeros((b, seq, seq))
        for k, pr in enumerate(prompts):
            ids[k, : lengths[k]] = pr.token_ids
            mask_flat[k] = k * seq + pr.mask_position
            bias[k, :, lengths[k]:] = _ATTN_MASKED
        p = self.params
        d = cfg.width
        dh = d // cfg.heads

        tok = T.embedding_lookup(p["tok_emb"], ids.reshape(-1))
        pos = T.embedding_lookup(p["pos_emb"], np.tile(np.arange(seq), b))
        x = T.reshape(T.add(tok, pos), (b, seq, d))
        bias_t = T.constant(bias)
        for i in range(cfg.layers):
            h = T.layer_norm(x, p[f"l{i}.ln1.g"], p[f"l{i}.ln1.b"])
            heads = []
            for j in range(cfg.heads):
                q = T.matmul(h, p[f"l{i}.h{j}.wq"])
                k_ = T.matmul(h, p[f"l{i}.h{j}.wk"])
                v = T.matmul(h, p[f"l{i}.h{j}.wv"])
                scores = T.scale(T.matmul(q, k_, transpose_b=True), dh ** -0.5)
                attn = T.row_softmax(T.add(scores, bias_t))
                heads.append(T.matmul(attn, v))
            merged = heads[0] if len(heads) == 1 else T.concat(heads, axis=2)
            attn_out = self._dropout(T.matmul(merged, p[f"l{i}.wo"]), train, rng)
            x = T.add(x, attn_out)
            h2 = T.layer_norm(x, p[f"l{i}.ln2.g"], p[f"l{i}.ln2.b"])
            ff = T.matmul(T.gelu(T.matmul(h2, p[f"l{i}.w1"])), p[f"l{i}.w2"])
            x = T.add(x, self._dropout(ff, train, rng))
        x = T.layer_norm(x, p["final_ln.g"], p["final_ln.b"])
        flat = T.reshape(x, (b * seq, d))
        return T.embedding_lookup(flat, mask_flat)

    def encode_masked(self, prompt):
        """Final-layer hidden vector at the mask position (evaluation mode)."""
        return self.forward_batch([prompt], train=False)

    def entity_logits(self, mask_embs):
        """One logit per entity: MLP(mask embedding) dotted with every entity row."""
        p = self.params
        z = T.matmul(T.gelu(T.matmul(mask_embs, p["head.w1"])), p["head.w2"])
        entity_rows = T.embedding_lookup(p["tok_emb"],
                                         np.asarray(self.vocab.entity_token_ids()))
        return T.matmul(z, entity_rows, transpose_b=True)

    def project(self, mask_embs):
        """Map mask embeddings into the shared contrastive space."""
        return T.matmul(mask_embs, self.params["proj"])

    # -- initialization from descriptions ----------------------------------

    def pretrain_entity_tokens(self, kg):
        """Seed entity token rows from their description prompts.

        Entities with empty descriptions keep their random initialization.
        Returns the number of initialized rows.
        """
        tok = self.params["tok_emb"]
        done = 0
        for e in kg.entities:
            if not e.description:
                continue
            prompt = build_description_prompt(e, self.vocab, self.config.max_len)
            emb = self.encode_masked(prompt)
            tok.values[self.vocab.entity_token(e.id)] = emb.values[0]
            done += 1
        return done
