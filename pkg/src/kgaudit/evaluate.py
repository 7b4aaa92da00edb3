"""Ranking evaluation: precision and recall at top-K.

For each cutoff ratio K, the ``ceil(K * n)`` most-suspicious triplets are
inspected: precision is the fraction of noise among them, recall the
fraction of all noise captured.  Both derive from the same hit count.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError


@dataclass
class EvalReport:
    total: int
    total_noisy: int
    per_k: dict                  # K -> {inspected, hits, precision, recall}
    per_kind: dict               # kind -> {total, per_k: {K -> {hits, recall}}}
    ranking_path: str = ""
    wall_clock: float = None     # never serialized into the primary report

    def to_json(self):
        doc = {
            "total": self.total,
            "total_noisy": self.total_noisy,
            "per_k": {f"{k:g}": v for k, v in sorted(self.per_k.items())},
            "per_kind": self.per_kind,
            "ranking": self.ranking_path,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def evaluate(labels_in_rank_order, k_values, kinds=None, ranking_path=""):
    """Score a most-suspicious-first ranking against noise labels."""
    labels = np.asarray(labels_in_rank_order, dtype=np.int64)
    n = len(labels)
    if n == 0:
        raise DataError("evaluation needs a non-empty ranking")
    total_noisy = int(labels.sum())
    per_k = {}
    for k in k_values:
        if not 0.0 < k <= 1.0:
            raise DataError(f"K must be in (0, 1], got {k}")
        inspected = math.ceil(k * n)
        if inspected == 0:
            raise DataError(f"K={k} inspects zero triplets on {n} items")
        hits = int(labels[:inspected].sum())
        per_k[float(k)] = {
            "inspected": inspected,
            "hits": hits,
            "precision": hits / inspected,
            "recall": hits / total_noisy if total_noisy else 0.0,
        }
    per_kind = {}
    if kinds is not None:
        kinds = list(kinds)
        if len(kinds) != n:
            raise DataError(f"{len(kinds)} kinds for {n} ranked items")
        for kind in sorted({k for k, lab in zip(kinds, labels) if lab == 1}):
            kind_mask = np.array([kk == kind for kk in kinds])
            kind_total = int((kind_mask & (labels == 1)).sum())
            entry = {"total": kind_total, "per_k": {}}
            for k in per_k:
                inspected = per_k[k]["inspected"]
                kind_hits = int((kind_mask[:inspected] & (labels[:inspected] == 1)).sum())
                entry["per_k"][f"{k:g}"] = {
                    "hits": kind_hits,
                    "recall": kind_hits / kind_total if kind_total else 0.0,
                }
            per_kind[kind] = entry
    return EvalReport(n, total_noisy, per_k, per_kind, ranking_path)
