import numpy as np
import pytest

from sclrec.metrics import (RankingReport, evaluate, map_at_k, mrr_at_k,
                            ndcg_at_k, rank_items)

from conftest import dataset_from_pairs


def brute_ap_at_k(ranked, relevant, k):
    hits, acc = 0, 0.0
    for r in range(min(k, len(ranked))):
        if ranked[r] in relevant:
            hits += 1
            acc += hits / (r + 1)
    return acc / min(k, len(relevant))


def brute_ndcg_at_k(ranked, relevant, k):
    dcg = sum(1 / np.log2(r + 2) for r in range(min(k, len(ranked))) if ranked[r] in relevant)
    ideal = sum(1 / np.log2(r + 2) for r in range(min(k, len(relevant))))
    return dcg / ideal


def test_rank_items_basic():
    assert list(rank_items(np.array([0.9, 0.1]), ())) == [0, 1]


def test_rank_items_exclusion():
    assert list(rank_items(np.array([0.9, 0.1, 0.5]), {0})) == [2, 1]


def test_rank_items_tie_break():
    assert list(rank_items(np.array([0.5, 0.5, 0.5]), ())) == [0, 1, 2]


def test_ndcg_cases():
    assert ndcg_at_k([3, 1, 2], {3}, 3) == pytest.approx(1.0)
    assert ndcg_at_k([1, 3, 2], {3}, 3) == pytest.approx(1 / np.log2(3))
    assert ndcg_at_k([1, 2, 4], {3}, 3) == 0.0
    with pytest.raises(ValueError):
        ndcg_at_k([1], {1}, 0)
    with pytest.raises(ValueError):
        ndcg_at_k([1], set(), 3)


def test_mrr_cases():
    assert mrr_at_k([3, 1], {3}, 3) == 1.0
    assert mrr_at_k([1, 3], {3}, 3) == 0.5
    assert mrr_at_k([1, 2, 4, 3], {3}, 3) == 0.0  # first hit outside cutoff


def test_map_cases():
    assert map_at_k([1, 2, 3], {1, 2, 3}, 3) == pytest.approx(1.0)
    assert map_at_k([9, 3, 8], {3}, 3) == pytest.approx(0.5)


def test_metrics_match_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        n = int(rng.integers(1, 11))
        ranked = list(rng.permutation(n))
        relevant = set(int(x) for x in rng.choice(n, size=int(rng.integers(1, n + 1)),
                                                  replace=False))
        k = int(rng.integers(1, 11))
        assert map_at_k(ranked, relevant, k) == brute_ap_at_k(ranked, relevant, k)
        assert ndcg_at_k(ranked, relevant, k) == pytest.approx(
            brute_ndcg_at_k(ranked, relevant, k), rel=1e-12)
        mrr = mrr_at_k(ranked, relevant, k)
        first = next((r + 1 for r in range(min(k, n)) if ranked[r] in relevant), None)
        assert mrr == (1.0 / first if first else 0.0)


def test_mrr_monotone_in_k():
    rng = np.random.default_rng(1)
    for _ in range(200):
        ranked = list(rng.permutation(10))
        relevant = {int(x) for x in rng.choice(10, size=3, replace=False)}
        vals = [mrr_at_k(ranked, relevant, k) for k in (3, 5, 10)]
        assert vals == sorted(vals)


def test_all_metrics_in_unit_interval():
    rng = np.random.default_rng(2)
    for _ in range(200):
        ranked = list(rng.permutation(12))
        relevant = {int(x) for x in rng.choice(12, size=int(rng.integers(1, 6)),
                                               replace=False)}
        for k in (3, 5, 10):
            for m in (map_at_k, mrr_at_k, ndcg_at_k):
                v = m(ranked, relevant, k)
                assert 0.0 <= v <= 1.0 + 1e-12


def test_perfect_ranking_ndcg_one():
    relevant = {0, 1, 2}
    ranked = [0, 1, 2, 3, 4]
    for k in (3, 5):
        assert ndcg_at_k(ranked, relevant, k) == pytest.approx(1.0)


def test_score_affine_invariance():
    rng = np.random.default_rng(3)
    scores = rng.normal(size=20)
    a = rank_items(scores, {4, 7})
    b = rank_items(3.7 * scores + 11.0, {4, 7})
    assert np.array_equal(a, b)


def test_evaluate_and_report():
    # 2 users, 4 items; user0 trains on item0, tests on item1
    ds = dataset_from_pairs(2, 4, train={(0, 0), (1, 1)}, test={(0, 1), (1, 2)})
    fu = np.array([[1.0, 0.0], [0.0, 1.0]])
    fi = np.array([[0.9, 0.0], [0.8, 0.9], [0.1, 0.8], [0.0, 0.0]])
    report = evaluate(fu, fi, ds)
    assert report.num_users == 2
    # user0: ranking over items {1,2,3} by score (0.8, 0.1, 0.0) -> item1 first
    # user1: ranking over items {0,2,3} by score (0.0, 0.8, 0.0) -> item2 first
    assert report.ndcg_at[3] == pytest.approx(1.0)
    assert report.mrr_at[3] == pytest.approx(1.0)
    row = report.csv_row("lightgcn")
    assert row.startswith("lightgcn,") and ",100.00" in row
    assert report.csv_header() == ("method,MAP@3,MAP@5,MAP@10,MRR@3,MRR@5,MRR@10,"
                                   "NDCG@3,NDCG@5,NDCG@10")


def test_evaluate_skips_users_without_test():
    ds = dataset_from_pairs(2, 3, train={(0, 0), (1, 1)}, test={(0, 1)})
    fu = np.eye(2)
    fi = np.array([[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]])
    report = evaluate(fu, fi, ds)
    assert report.num_users == 1


def test_evaluate_no_users_errors():
    ds = dataset_from_pairs(1, 2, train={(0, 0)}, test=set())
    with pytest.raises(ValueError):
        evaluate(np.eye(1), np.ones((2, 1)), ds)
