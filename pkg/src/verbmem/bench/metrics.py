"""Retrieval metrics and ROC AUC."""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np


def recall_at_k(retrieved: Sequence[int], relevant: Sequence[int], k: int) -> float:
    rel = set(relevant)
    if not rel:
        raise ValueError("relevant set is empty")
    return len(set(retrieved[:k]) & rel) / len(rel)


def reciprocal_rank(retrieved: Sequence[int], relevant: Sequence[int]) -> float:
    rel = set(relevant)
    for rank, event_id in enumerate(retrieved, start=1):
        if event_id in rel:
            return 1.0 / rank
    return 0.0


def retrieval_metrics(runs: Sequence[Sequence[int]], relevant: Sequence[Sequence[int]], k: int) -> dict[str, float]:
    """Mean recall@k and MRR over parallel lists of rankings and relevant sets."""
    if len(runs) != len(relevant):
        raise ValueError("runs and relevant sets differ in length")
    if not runs:
        return {"recall_at_k": 0.0, "mrr": 0.0, "n_queries": 0}
    recalls = [recall_at_k(r, rel, k) for r, rel in zip(runs, relevant)]
    rrs = [reciprocal_rank(r[:k], rel) for r, rel in zip(runs, relevant)]
    return {"recall_at_k": sum(recalls) / len(recalls), "mrr": sum(rrs) / len(rrs), "n_queries": len(runs)}


def _average_ranks(values: np.ndarray) -> np.ndarray:
    order = np.argsort(values, kind="mergesort")
    sorted_vals = values[order]
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def auc_rank_sum(scores: Sequence[float], labels: Sequence[int]) -> Optional[float]:
    """Mann-Whitney AUC with average ranks for ties; ``None`` when only one class is present."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels).astype(bool)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        return None
    ranks = _average_ranks(s)
    return float((ranks[y].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def auc_all_pairs(scores: Sequence[float], labels: Sequence[int]) -> Optional[float]:
    """Brute-force AUC: fraction of (positive, negative) pairs ordered correctly, ties count half."""
    pos = [s for s, l in zip(scores, labels) if l]
    neg = [s for s, l in zip(scores, labels) if not l]
    if not pos or not neg:
        return None
    wins = 0.0
    for p in pos:
        for n in neg:
            wins += 1.0 if p > n else 0.5 if p == n else 0.0
    return wins / (len(pos) * len(neg))


def wilson_interval(successes: int, n: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        return 0.0, 1.0
    p = successes / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)
