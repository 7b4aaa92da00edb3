"""Knowledge fusion: rank-based score combination and adaptive confidences.

Suspicion ranks run from 1 (most suspicious).  The reconstruction rank sorts
scores descending (large loss = suspicious); the contrastive rank sorts
ascending (low cross-view agreement = suspicious).  Bucketed reciprocal
ranks fuse the two, and sorted Gaussian pseudo labels turn the fused rank
into a confidence in [0.01, 1]: the most suspicious triplet gets the
smallest label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError

CONFIDENCE_FLOOR = 0.01
_DEGENERATE_SPAN = 1e-15


def fuse_reconstruction(score_text, score_struct, lam):
    """Combine the two reconstruction scores: text + lam * struct."""
    return np.asarray(score_text, dtype=np.float64) + lam * np.asarray(
        score_struct, dtype=np.float64)


def rank_fuse(rank1, rank2, gamma, beta):
    """Bucketed reciprocal-rank fusion; larger = more suspicious."""
    r1 = np.asarray(rank1, dtype=np.int64)
    r2 = np.asarray(rank2, dtype=np.int64)
    if (r1 < 1).any() or (r2 < 1).any():
        raise ShapeError("ranks must be >= 1")
    g = int(gamma)
    if g < 1:
        raise ShapeError(f"gamma must be >= 1: {gamma}")
    q1 = (r1 + g - 1) // g
    q2 = (r2 + g - 1) // g
    return 1.0 / q1 + 1.0 / q2.astype(np.float64) ** float(beta)


def auto_gamma(n):
    """Default bucket size: one thousandth of the dataset, at least 1."""
    return max(1, -(-int(n) // 1000))


def make_pseudo_labels(n, mu, rho, seed):
    """Sorted, normalized Gaussian pseudo labels in [0.01, 1].

    Draws n values from N(mu, rho), sorts ascending, min-max rescales to
    [0, 1] and clamps the floor to 0.01.  A degenerate spread (rho = 0)
    yields all ones.
    """
    if n < 1:
        raise ShapeError(f"need n >= 1 pseudo labels, got {n}")
    rng = np.random.default_rng(seed)
    z = np.sort(rng.normal(float(mu), float(rho), size=int(n)))
    span = z[-1] - z[0]
    if span < _DEGENERATE_SPAN:
        return np.ones(int(n))
    scaled = (z - z[0]) / span
    return np.maximum(scaled, CONFIDENCE_FLOOR)


def rank_descending(values):
    """1-based ranks with rank 1 = largest value; ties broken by stable id order."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(-values, kind="stable")
    ranks = np.empty(len(values), dtype=np.int64)
    ranks[order] = np.arange(1, len(values) + 1)
    return ranks


def rank_ascending(values):
    """1-based ranks with rank 1 = smallest value; stable ties."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.int64)
    ranks[order] = np.arange(1, len(values) + 1)
    return ranks


def assign_confidence(fused_scores, pseudo_labels):
    """Map fused suspicion scores to confidences via sorted pseudo labels.

    Returns (final ranks, confidences): rank 1 = most suspicious = smallest
    label.  Ties in the fused score keep stable input order.
    """
    fused_scores = np.asarray(fused_scores, dtype=np.float64)
    z = np.asarray(pseudo_labels, dtype=np.float64)
    if fused_scores.shape != z.shape:
        raise ShapeError(
            f"{fused_scores.shape} scores vs {z.shape} pseudo labels")
    ranks = rank_descending(fused_scores)
    return ranks, z[ranks - 1]


@dataclass
class ConfidenceTable:
    """Per-triplet suspicion scores, ranks, and adaptive confidences."""
    triplets: list
    score_reconstruct: np.ndarray
    score_contrastive: np.ndarray  # None for single-view variants
    rank1: np.ndarray
    rank2: np.ndarray              # None for single-view variants
    fused: np.ndarray
    rank: np.ndarray
    confidence: np.ndarray

    def suspicion_order(self):
        """Triplet indices most-suspicious first (ascending confidence)."""
        return np.argsort(self.rank, kind="stable")

    def write_tsv(self, path, kg):
        cols_missing = self.score_contrastive is None
        with open(path, "w", encoding="utf-8") as f:
            for i in self.suspicion_order():
                h, r, t = self.triplets[i]
                contr = "" if cols_missing else repr(float(self.score_contrastive[i]))
                f.write("\t".join([
                    kg.entities[h].token,
                    kg.relations[r].token,
                    kg.entities[t].token,
                    repr(float(self.score_reconstruct[i])),
                    contr,
                    repr(float(self.fused[i])),
                    str(int(self.rank[i])),
                    repr(float(self.confidence[i])),
                ]) + "\n")


def build_confidence_table(triplets, score_text, score_struct, score_contrastive,
                           hyper, seed):
    """Fuse per-triplet scores into ranks and confidences.

    ``score_contrastive`` may be None (single-view variants), in which case
    the fused score is the reconstruction score alone.
    """
    n = len(triplets)
    score_rec = fuse_reconstruction(score_text, score_struct, hyper.lam)
    rank1 = rank_descending(score_rec)
    if score_contrastive is None:
        rank2 = None
        fused = score_rec
    else:
        rank2 = rank_ascending(score_contrastive)
        gamma = hyper.gamma if hyper.gamma >= 1 else auto_gamma(n)
        fused = rank_fuse(rank1, rank2, gamma, hyper.beta)
    labels = make_pseudo_labels(n, hyper.mu, hyper.rho, seed)
    rank, confidence = assign_confidence(fused, labels)
    contr = None if score_contrastive is None else np.asarray(score_contrastive,
                                                              dtype=np.float64)
    return ConfidenceTable(list(triplets), score_rec, contr, rank1, rank2, fused,
                           rank, confidence)
