"""Training losses and per-triplet suspicion scores.

Reconstruction: four masked-entity cross-entropies per triplet; the text
and structure sums double as error scores.  Cross-view contrastive
alignment: an InfoNCE-style loss over two anchor pairs per triplet with
in-batch negatives plus embedding-level corrupted pairs, cosine similarity
throughout, no temperature.  Both losses are weighted per triplet by an
adaptive confidence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .errors import ConfigError, ShapeError


@dataclass
class HyperParams:
    alpha: float = 0.5        # text/structure balance in the joint reconstruction loss
    lam: float = 1.0          # structure weight when fusing reconstruction scores
    gamma: int = 0            # rank bucket size; 0 = ceil(n/1000) at fusion time
    beta: float = 1.0         # exponent on the contrastive rank term
    x_negatives: int = 4      # corrupted pairs per anchor
    mu: float = 0.5           # pseudo-label Gaussian mean
    rho: float = 0.15         # pseudo-label Gaussian standard deviation

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0,1]: {self.alpha}")
        if self.gamma < 0 or int(self.gamma) != self.gamma:
            raise ConfigError(f"gamma must be a non-negative integer: {self.gamma}")
        if self.x_negatives < 1:
            raise ConfigError(f"x_negatives must be >= 1: {self.x_negatives}")
        if self.rho < 0:
            raise ConfigError(f"rho must be >= 0: {self.rho}")


@dataclass
class TripletLossBundle:
    """Per-triplet reconstruction losses and derived scores."""
    text_head: float
    text_tail: float
    struct_head: float
    struct_tail: float

    @property
    def score_text(self):
        return self.text_head + self.text_tail

    @property
    def score_struct(self):
        return self.struct_head + self.struct_tail


def cosine(a, b):
    """Plain cosine similarity with the zero-vector convention of 0."""
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


@dataclass
class BatchViews:
    """Projected mask embeddings for one batch plus its corrupted pairs.

    ``text_head[i]`` is the text view of triplet i with the head masked
    (a stand-in for the head entity); ``struct_tail[i]`` the structure view
    with the tail masked, and so on.  ``coin[i, x]`` True means corruption x
    of triplet i replaced the head slot, using batch item ``other[i, x]``.
    """
    text_head: np.ndarray    # (B, P)
    text_tail: np.ndarray
    struct_head: np.ndarray
    struct_tail: np.ndarray
    coin: np.ndarray         # (B, X) bool
    other: np.ndarray        # (B, X) int

    @property
    def batch_size(self):
        return self.text_head.shape[0]

    def corrupted_pair(self, i, x, anchor):
        """The (text-side, struct-side) vectors of corruption x for anchor 1 or 2."""
        j = int(self.other[i, x])
        if anchor == 1:
            if self.coin[i, x]:
                return self.text_head[j], self.struct_tail[i]
            return self.text_head[i], self.struct_tail[j]
        if self.coin[i, x]:
            return self.text_tail[i], self.struct_head[j]
        return self.text_tail[j], self.struct_head[i]


def draw_corruptions(batch_size, x_negatives, rng):
    """Coin flips and in-batch partner indices for corrupted pairs."""
    coin = rng.random((batch_size, x_negatives)) < 0.5
    if batch_size > 1:
        other = rng.integers(0, batch_size - 1, size=(batch_size, x_negatives))
        shift = other >= np.arange(batch_size)[:, None]
        other = other + shift
    else:
        other = np.zeros((batch_size, x_negatives), dtype=np.int64)
    return coin, other.astype(np.int64)


def negative_similarity(i, views, anchor=1):
    """Summed exponentiated similarities of triplet i's negative samples."""
    if anchor == 1:
        a, b = views.text_head, views.struct_tail
    else:
        a, b = views.text_tail, views.struct_head
    total = 0.0
    for j in range(views.batch_size):
        if j != i:
            total += np.exp(cosine(a[i], b[j]))
    for x in range(views.other.shape[1]):
        m, n = views.corrupted_pair(i, x, anchor)
        total += np.exp(cosine(m, n))
    return total


def icl_losses(i, views):
    """The two anchor-pair contrastive losses of triplet i."""
    out = []
    for anchor, (a, b) in ((1, (views.text_head, views.struct_tail)),
                           (2, (views.text_tail, views.struct_head))):
        pos = np.exp(cosine(a[i], b[i]))
        neg = negative_similarity(i, views, anchor=anchor)
        out.append(float(-np.log(pos / (pos + neg))))
    return tuple(out)


def contrastive_score(text_head_vec, struct_tail_vec):
    """Cosine agreement of a triplet's own anchor pair; higher = more trustworthy."""
    return cosine(text_head_vec, struct_tail_vec)


def weighted_reconstruction_loss(bundles, confidences, alpha):
    """Confidence-weighted sum of text and structure reconstruction losses."""
    confidences = np.asarray(confidences, dtype=np.float64)
    if confidences.shape != (len(bundles),):
        raise ShapeError(
            f"{len(bundles)} bundles but {confidences.shape} confidences")
    l_text = sum(c * b.score_text for c, b in zip(confidences, bundles))
    l_struct = sum(c * b.score_struct for c, b in zip(confidences, bundles))
    return alpha * l_text + (1.0 - alpha) * l_struct


def contrastive_loss(icl_pairs, confidences):
    """Confidence-weighted sum of both anchor-pair losses over a batch."""
    confidences = np.asarray(confidences, dtype=np.float64)
    if confidences.shape != (len(icl_pairs),):
        raise ShapeError(
            f"{len(icl_pairs)} loss pairs but {confidences.shape} confidences")
    return float(sum(c * (l1 + l2) for c, (l1, l2) in zip(confidences, icl_pairs)))


# ---------------------------------------------------------------------------
# graph-building variants used inside the training step
# ---------------------------------------------------------------------------

def reconstruction_loss_graph(ce_text_head, ce_text_tail, ce_struct_head,
                              ce_struct_tail, confidences, alpha):
    """Differentiable version of the weighted reconstruction loss.

    Inputs are per-triplet cross-entropy Tensors of shape (B,).  Returns
    (loss Tensor, text-sum Tensor, struct-sum Tensor).
    """
    conf = T.constant(confidences)
    l_text = T.tsum(T.multiply(T.add(ce_text_head, ce_text_tail), conf))
    l_struct = T.tsum(T.multiply(T.add(ce_struct_head, ce_struct_tail), conf))
    loss = T.add(T.scale(l_text, alpha), T.scale(l_struct, 1.0 - alpha))
    return loss, l_text, l_struct


def _gather_entries(matrix, rows, cols, b):
    flat = T.reshape(matrix, (b * b, 1))
    picked = T.embedding_lookup(flat, rows * b + cols)
    return T.reshape(picked, (len(rows),))


def contrastive_loss_graph(text_head, text_tail, struct_head, struct_tail,
                           coin, other, confidences):
    """Differentiable confidence-weighted contrastive loss over a batch.

    View arguments are projected mask-embedding Tensors of shape (B, P);
    ``coin``/``other`` come from :func:`draw_corruptions`.  Returns
    (loss Tensor, per-triplet loss Tensor of shape (B,)).
    """
    b, x = coin.shape
    idx = np.arange(b)
    off_diag = T.constant(1.0 - np.eye(b))

    def anchor_term(text_view, struct_view, m_rows, m_cols):
        sims = T.matmul(T.l2_normalize_rows(text_view),
                        T.l2_normalize_rows(struct_view), transpose_b=True)
        esims = T.texp(sims)
        in_batch = T.tsum(T.multiply(esims, off_diag), axis=1)
        corrupted = T.reshape(
            _gather_entries(esims, m_rows.reshape(-1), m_cols.reshape(-1), b),
            (b, x))
        neg = T.add(in_batch, T.tsum(corrupted, axis=1))
        pos = _gather_entries(sims, idx, idx, b)
        # -log(exp(pos) / (exp(pos) + neg)) == log(exp(pos) + neg) - pos
        return T.add(T.tlog(T.add(T.texp(pos), neg)), T.scale(pos, -1.0))

    other_i = np.broadcast_to(idx[:, None], (b, x))
    # anchor 1: head corruption swaps the text side, tail corruption the struct side
    rows1 = np.where(coin, other, other_i)
    cols1 = np.where(coin, other_i, other)
    # anchor 2: head corruption swaps the struct side, tail corruption the text side
    rows2 = np.where(coin, other_i, other)
    cols2 = np.where(coin, other, other_i)

    l1 = anchor_term(text_head, struct_tail, rows1, cols1)
    l2 = anchor_term(text_tail, struct_head, rows2, cols2)
    per_triplet = T.add(l1, l2)
    loss = T.tsum(T.multiply(per_triplet, T.constant(confidences)))
    return loss, per_triplet
