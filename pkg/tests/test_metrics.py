import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from ultrlab.metrics import dcg_at_k, evaluate_run, ideal_dcg_at_k, mean_ndcg, ndcg_at_k, ndcg_of_scores

grade_lists = st.lists(st.integers(0, 4), min_size=1, max_size=6)


class TestDCG:
    def test_all_zero(self):
        assert dcg_at_k([0, 0, 0], 10) == 0.0

    def test_hand_value(self):
        assert dcg_at_k([3, 2], 2) == pytest.approx(7 + 3 / math.log2(3), abs=1e-12)
        assert dcg_at_k([3, 2], 2) == pytest.approx(8.8928, abs=1e-4)

    def test_k_beyond_list(self):
        assert dcg_at_k([3, 1, 2], 50) == dcg_at_k([3, 1, 2], 3)

    def test_invalid_k(self):
        with pytest.raises(ValueError):
            dcg_at_k([1], 0)

    @settings(max_examples=200, deadline=None)
    @given(grade_lists, st.integers(1, 10), st.data())
    def test_swap_monotone(self, grades, k, data):
        if len(grades) < 2:
            return
        i = data.draw(st.integers(0, len(grades) - 2))
        j = data.draw(st.integers(i + 1, len(grades) - 1))
        if grades[j] > grades[i]:
            swapped = list(grades)
            swapped[i], swapped[j] = swapped[j], swapped[i]
            assert dcg_at_k(swapped, k) >= dcg_at_k(grades, k) - 1e-12


class TestNDCG:
    def test_ideal_is_one(self):
        assert ndcg_at_k([4, 3, 1, 0]) == 1.0

    def test_all_zero_is_zero(self):
        assert ndcg_at_k([0, 0, 0]) == 0.0

    @settings(max_examples=300, deadline=None)
    @given(grade_lists, st.integers(1, 10))
    def test_ideal_matches_permutation_oracle(self, grades, k):
        assert ideal_dcg_at_k(grades, k) == pytest.approx(oracles.brute_ideal_dcg(grades, k), rel=1e-12, abs=1e-12)

    @settings(max_examples=300, deadline=None)
    @given(grade_lists, st.integers(1, 10))
    def test_bounded(self, grades, k):
        v = ndcg_at_k(grades, k=k)
        assert 0.0 <= v <= 1.0 + 1e-12

    @settings(max_examples=200, deadline=None)
    @given(grade_lists)
    def test_one_iff_sorted_prefix(self, grades):
        k = 10
        ideal = sorted(grades, reverse=True)
        is_ideal = [2**g - 1 for g in grades[:k]] == [2**g - 1 for g in ideal[:k]]
        if sum(ideal) > 0:
            assert (ndcg_at_k(grades, k=k) == pytest.approx(1.0)) == is_ideal

    def test_scores_ties_are_stable(self):
        assert ndcg_of_scores([0.0, 0.0], [0, 3]) < 1.0

    def test_mean(self):
        assert mean_ndcg(np.array([[2.0, 1.0], [1.0, 2.0]]), np.array([[1, 0], [1, 0]])) == pytest.approx(
            (1 + (1 / math.log2(3))) / 2
        )


class TestEvaluateRun:
    def test_ideal_run(self):
        truth = {("q", "a"): 2, ("q", "b"): 1, ("q", "c"): 0}
        summary, per_query = evaluate_run({"q": {"a": 3.0, "b": 2.0, "c": 1.0}}, truth)
        assert summary["ndcg@10"] == 1.0 and summary["n_queries"] == 1
        assert per_query[0]["qid"] == "q"

    def test_unjudged_docs_count_zero(self):
        truth = {("q", "a"): 1}
        summary, _ = evaluate_run({"q": {"x": 2.0, "a": 1.0}}, truth)
        assert summary["ndcg@10"] == pytest.approx(1 / math.log2(3))

    def test_empty_run(self):
        summary, per_query = evaluate_run({}, {})
        assert summary["n_queries"] == 0 and per_query == []
