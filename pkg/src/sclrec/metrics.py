"""Top-K ranking evaluation: MAP, MRR, NDCG at cutoffs 3/5/10 with
training-item exclusion and per-user averaging."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_CUTOFFS = (3, 5, 10)


@dataclass(frozen=True)
class RankingReport:
    map_at: dict = field(default_factory=dict)   # K -> value in [0, 1]
    mrr_at: dict = field(default_factory=dict)
    ndcg_at: dict = field(default_factory=dict)
    num_users: int = 0

    def csv_header(self) -> str:
        ks = sorted(self.map_at)
        cols = [f"{m}@{k}" for m in ("MAP", "MRR", "NDCG") for k in ks]
        return "method," + ",".join(cols)

    def csv_row(self, method: str) -> str:
        ks = sorted(self.map_at)
        vals = [self.map_at[k] for k in ks] + [self.mrr_at[k] for k in ks] \
            + [self.ndcg_at[k] for k in ks]
        return method + "," + ",".join(f"{100.0 * v:.2f}" for v in vals)


def rank_items(user_scores: np.ndarray, train_exclusions) -> np.ndarray:
    """All items sorted by score descending, training items removed,
    ties broken by ascending item id."""
    scores = np.asarray(user_scores, dtype=np.float64)
    ids = np.arange(scores.shape[0])
    keep = np.ones(scores.shape[0], dtype=bool)
    for i in train_exclusions:
        keep[i] = False
    order = np.lexsort((ids[keep], -scores[keep]))
    return ids[keep][order]


def ndcg_at_k(ranked, relevant_set, k: int) -> float:
    if k < 1:
        raise ValueError("k must be >= 1")
    if not relevant_set:
        raise ValueError("empty relevant set")
    dcg = sum(1.0 / np.log2(r + 2) for r, item in enumerate(ranked[:k]) if item in relevant_set)
    idcg = sum(1.0 / np.log2(r + 2) for r in range(min(k, len(relevant_set))))
    return dcg / idcg


def mrr_at_k(ranked, relevant_set, k: int) -> float:
    for r, item in enumerate(ranked[:k]):
        if item in relevant_set:
            return 1.0 / (r + 1)
    return 0.0


def map_at_k(ranked, relevant_set, k: int) -> float:
    hits = 0
    precision_sum = 0.0
    for r, item in enumerate(ranked[:k]):
        if item in relevant_set:
            hits += 1
            precision_sum += hits / (r + 1)
    return precision_sum / min(k, len(relevant_set))


def evaluate(final_user: np.ndarray, final_item: np.ndarray, dataset,
             cutoffs=DEFAULT_CUTOFFS) -> RankingReport:
    """Mean per-user metrics over users with at least one test interaction."""
    train_by_user = {}
    for u, i in dataset.train:
        train_by_user.setdefault(u, set()).add(i)
    test_by_user = {}
    for u, i in dataset.test:
        test_by_user.setdefault(u, set()).add(i)
    if not test_by_user:
        raise ValueError("no users with test interactions to evaluate")
    sums = {m: {k: 0.0 for k in cutoffs} for m in ("map", "mrr", "ndcg")}
    n = 0
    for u in sorted(test_by_user):
        scores = final_user[u] @ final_item.T
        ranked = rank_items(scores, train_by_user.get(u, ()))
        relevant = test_by_user[u]
        for k in cutoffs:
            sums["map"][k] += map_at_k(ranked, relevant, k)
            sums["mrr"][k] += mrr_at_k(ranked, relevant, k)
            sums["ndcg"][k] += ndcg_at_k(ranked, relevant, k)
        n += 1
    return RankingReport(
        map_at={k: sums["map"][k] / n for k in cutoffs},
        mrr_at={k: sums["mrr"][k] / n for k in cutoffs},
        ndcg_at={k: sums["ndcg"][k] / n for k in cutoffs},
        num_users=n,
    )
