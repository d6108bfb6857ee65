import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ultrlab.corpus_io import ClickLog
from ultrlab.negsample import (
    NegSpec,
    ReconstructedList,
    listwise_loss,
    listwise_loss_grad,
    reconstruct_all,
    reconstruct_list,
    reconstructed_data,
    sample_hard_negatives,
)
from ultrlab.nnrank import numeric_gradient, relative_error
from ultrlab.textfeat import build_index

DOCS = [f"d{i}" for i in range(10)]
POOL = [f"r{i:03d}" for i in range(300)]


def log_with(clicks):
    return ClickLog("q1", DOCS, clicks)


class TestHardNegatives:
    CANDS = [("a", 5.0), ("b", 4.0), ("c", 3.0), ("d", 2.0), ("e", 1.0)]

    def test_all_when_pool_small(self):
        assert set(sample_hard_negatives(self.CANDS, 5)) == {"a", "b", "c", "d", "e"}

    def test_two_are_extremes(self):
        assert set(sample_hard_negatives(self.CANDS, 2, seed=3)) == {"a", "e"}

    def test_deterministic(self):
        cands = [(f"x{i}", float(s)) for i, s in enumerate(np.random.default_rng(0).normal(size=100))]
        assert sample_hard_negatives(cands, 20, seed=4) == sample_hard_negatives(cands, 20, seed=4)

    def test_exclude_and_zero(self):
        assert "a" not in sample_hard_negatives(self.CANDS, 2, exclude={"a"})
        assert sample_hard_negatives(self.CANDS, 0) == []

    @settings(max_examples=100, deadline=None)
    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=60), st.integers(1, 30), st.integers(0, 10))
    def test_distinct_and_sized(self, scores, n, seed):
        cands = [(f"x{i:02d}", s) for i, s in enumerate(scores)]
        out = sample_hard_negatives(cands, n, seed=seed)
        assert len(out) == min(n, len(cands)) and len(set(out)) == len(out)
        ids = dict(cands)
        if len(cands) > n >= 2:
            assert max(ids[d] for d in out) == max(scores)
            assert min(ids[d] for d in out) == min(scores)


class TestReconstruct:
    def test_click_only(self):
        r = reconstruct_list(log_with([0, 1] + [0] * 8), NegSpec(n_hard=0), POOL, [])
        assert len(r) == 10 and r.labels.count(1) == 1
        assert r.entries[0] == ("d1", 1, "kept")
        assert all(o == "random_neg" for _, _, o in r.entries[1:])

    def test_last_click(self):
        r = reconstruct_list(log_with([1, 0, 1] + [0] * 7), NegSpec("last_click", n_hard=0), POOL, [])
        assert r.doc_ids[:3] == ["d0", "d1", "d2"] and r.labels[:3] == [1, 0, 1]
        assert [o for _, _, o in r.entries].count("random_neg") == 7

    def test_no_click(self):
        assert reconstruct_list(log_with([0] * 10), NegSpec(), POOL, []) is None

    def test_hard_appended_and_shortfall_filled(self):
        spec = NegSpec(n_hard=5, n_random=2)
        r = reconstruct_list(log_with([1] + [0] * 9), spec, POOL, ["h1", "h2", "d3"])
        assert len(r) == spec.list_len == 17
        origins = [o for _, _, o in r.entries]
        assert origins.count("hard_neg") == 2 and origins[-2:] == ["hard_neg", "hard_neg"]
        assert "d3" not in r.doc_ids[1:]

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.integers(0, 1), min_size=10, max_size=10), st.sampled_from(["click_only", "last_click"]),
           st.integers(0, 20), st.integers(0, 5), st.integers(0, 99))
    def test_equal_length_no_duplicates(self, clicks, scheme, n_hard, n_random, seed):
        spec = NegSpec(scheme, n_hard=n_hard, n_random=n_random, seed=seed)
        hard = [f"h{i}" for i in range(n_hard // 2)]
        r = reconstruct_list(log_with(clicks), spec, POOL + DOCS, hard)
        if not any(clicks):
            assert r is None
            return
        assert len(r) == spec.list_len
        assert len(set(r.doc_ids)) == len(r)
        assert sum(r.labels) == sum(clicks)

    def test_validation(self):
        with pytest.raises(ValueError):
            ReconstructedList("q", (("a", 1, "kept"), ("a", 0, "random_neg")))
        with pytest.raises(ValueError):
            ReconstructedList("q", (("a", 1, "hard_neg"),))
        with pytest.raises(ValueError):
            NegSpec("all_clicks")
        assert NegSpec("last-click").scheme == "last_click"


class TestListwiseLoss:
    def test_uniform_scores(self):
        assert listwise_loss(np.zeros(60), [1] + [0] * 59) == pytest.approx(math.log(60))

    def test_no_positive(self):
        with pytest.raises(ValueError):
            listwise_loss(np.zeros(5), np.zeros(5))

    def test_gradient(self, rng):
        for _ in range(30):
            s = rng.normal(size=20)
            y = np.zeros(20)
            y[rng.choice(20, size=3, replace=False)] = 1
            num = numeric_gradient(lambda v: listwise_loss(v, y), s)
            assert relative_error(listwise_loss_grad(s, y), num).max() < 1e-4


def test_reconstruct_all_on_corpus(small_sim):
    _, corpus, logs = small_sim
    index = build_index(corpus.docs)
    queries = {q.qid: q.text for q in corpus.queries}
    spec = NegSpec(n_hard=5, n_random=1, pool_size=40)
    lists, skipped = reconstruct_all(logs, queries, index, spec, threads=2)
    assert skipped == sum(1 for cl in logs if not any(cl.clicks))
    assert {len(r) for r in lists} == {16}
    again, _ = reconstruct_all(logs, queries, index, spec, threads=1)
    assert [r.entries for r in again] == [r.entries for r in lists]
    data = reconstructed_data(lists[:4], queries, index)
    assert data.X.shape[:2] == (4, 16) and data.y.sum() == sum(sum(r.labels) for r in lists[:4])


def test_zero_negatives_keeps_click_only_lists(small_sim):
    _, corpus, logs = small_sim
    index = build_index(corpus.docs)
    queries = {q.qid: q.text for q in corpus.queries}
    lists, _ = reconstruct_all(logs, queries, index, NegSpec(n_hard=0))
    for r, cl in zip(lists, [cl for cl in logs if any(cl.clicks)]):
        kept = [d for d, c in zip(cl.ranked_docs, cl.clicks) if c]
        assert [d for d, _, o in r.entries if o == "kept"] == kept
        assert len(r) == 10
