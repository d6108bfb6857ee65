import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from ultrlab.dla import (
    DLARanker,
    ipw_rank_weights,
    observation_loss,
    observation_loss_grad,
    propensity_probs,
    ranking_loss,
    ranking_loss_grad,
)
from ultrlab.nnrank import numeric_gradient, relative_error, weighted_softmax_ce

logit_lists = st.lists(st.floats(-5, 5), min_size=10, max_size=10)
click_lists = st.lists(st.integers(0, 1), min_size=10, max_size=10)


class TestPropensity:
    def test_uniform(self):
        np.testing.assert_allclose(propensity_probs(np.zeros(10)), 0.1)

    def test_ln2(self):
        logits = np.zeros(10)
        logits[0] = math.log(2)
        assert propensity_probs(logits)[0] == pytest.approx(2 / 11, rel=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(logit_lists, st.floats(-20, 20))
    def test_sum_and_shift(self, logits, c):
        p = propensity_probs(logits)
        assert abs(p.sum() - 1) < 1e-9
        np.testing.assert_allclose(propensity_probs(np.array(logits) + c), p, atol=1e-12)

    def test_wrong_length(self):
        with pytest.raises(ValueError):
            propensity_probs(np.zeros(9))


class TestIPWWeights:
    def test_uniform(self):
        np.testing.assert_array_equal(ipw_rank_weights(np.full(10, 0.1)), np.ones(10))

    def test_ratio(self):
        p = np.array([0.5, 0.25] + [0.25 / 8] * 8)
        assert ipw_rank_weights(p)[1] == 2.0

    def test_cap(self):
        p = np.array([0.9] + [1e-6] * 9)
        assert ipw_rank_weights(p, cap=10)[5] == 10.0

    def test_zero_probability(self):
        with pytest.raises(ValueError):
            ipw_rank_weights(np.array([0.5, 0.0] + [0.5 / 8] * 8))

    @settings(max_examples=100, deadline=None)
    @given(logit_lists)
    def test_first_weight_exactly_one(self, logits):
        assert ipw_rank_weights(propensity_probs(logits))[0] == 1.0


class TestRankingLoss:
    def test_no_clicks(self):
        assert ranking_loss(np.arange(10.0), np.zeros(10), np.ones(10)) == 0.0

    def test_two_docs(self):
        assert ranking_loss(np.zeros(2), [1, 0], [1, 1]) == pytest.approx(math.log(2), abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(logit_lists, click_lists, st.lists(st.floats(1, 10), min_size=10, max_size=10))
    def test_matches_loop_oracle(self, s, c, w):
        assert ranking_loss(np.array(s), c, w) == pytest.approx(oracles.dla_loss(s, c, w), rel=1e-10, abs=1e-10)

    @settings(max_examples=100, deadline=None)
    @given(logit_lists, click_lists)
    def test_reduces_to_softmax_ce(self, s, c):
        loss, _ = weighted_softmax_ce(np.array(s), np.array(c, dtype=float))
        assert ranking_loss(np.array(s), c, np.ones(10)) == pytest.approx(loss, rel=1e-12, abs=1e-12)

    def test_gradient(self, rng):
        for _ in range(30):
            s = rng.normal(size=10)
            c = (rng.random(10) < 0.4).astype(float)
            w = rng.uniform(1, 10, size=10)
            num = numeric_gradient(lambda v: float(ranking_loss(v, c, w)), s)
            assert relative_error(ranking_loss_grad(s, c, w), num).max() < 1e-4

    def test_non_negative(self, rng):
        s = rng.normal(size=(5, 10))
        c = (rng.random((5, 10)) < 0.5).astype(float)
        assert np.all(ranking_loss(s, c, np.ones(10)) >= 0)


class TestObservationLoss:
    def test_no_clicks(self):
        assert observation_loss(np.zeros(10), np.zeros(10), np.ones(10)) == 0.0

    def test_uniform_relevance(self, rng):
        g = rng.normal(size=10)
        c = np.array([1, 0, 1] + [0] * 7, dtype=float)
        w = ipw_rank_weights(np.full(10, 0.1))
        logp = g - np.log(np.exp(g).sum())
        assert observation_loss(g, c, w) == pytest.approx(-(logp[0] + logp[2]))

    def test_gradient_summed_over_batch(self, rng):
        for _ in range(30):
            g = rng.normal(size=10)
            c = (rng.random((4, 10)) < 0.4).astype(float)
            w = rng.uniform(1, 10, size=(4, 10))

            def total(v):
                return float(observation_loss(np.broadcast_to(v, c.shape), c, w).sum())

            num = numeric_gradient(total, g)
            assert relative_error(observation_loss_grad(g, c, w), num).max() < 1e-4


def pbm_lists(rng, n=300, eta=1.0):
    X = rng.normal(size=(n, 10, 24))
    rel = 1 / (1 + np.exp(-(2 * X[..., 0])))
    exam = (1.0 / np.arange(1, 11)) ** eta
    clicks = (rng.random((n, 10)) < rel * exam).astype(float)
    grades = np.round(4 * rel)
    return X, clicks, grades


class TestDLARanker:
    def test_deterministic(self, rng):
        X, c, g = pbm_lists(rng, n=40)
        kw = dict(learning_rate=1e-3, propensity_learning_rate=1e-2, max_epochs=3, patience=3)
        a = DLARanker(**kw).fit(X, c, eval_set=(X, g))
        b = DLARanker(**kw).fit(X, c, eval_set=(X, g))
        np.testing.assert_array_equal(a.propensity_logits_, b.propensity_logits_)
        np.testing.assert_array_equal(a.params_.to_vector(), b.params_.to_vector())

    def test_history_records(self, rng):
        X, c, g = pbm_lists(rng, n=40)
        m = DLARanker(learning_rate=1e-3, max_epochs=2, patience=5).fit(X, c, eval_set=(X, g))
        rec = m.history_[-1]
        assert {"epoch", "ranking_loss", "observation_loss", "valid_ndcg10", "propensity_ratios"} <= set(rec)
        assert rec["propensity_ratios"][0] == 1.0

    def test_propensity_direction(self, rng):
        X, c, g = pbm_lists(rng, n=600)
        m = DLARanker(learning_rate=1e-3, propensity_learning_rate=2e-2, max_epochs=6, patience=10).fit(X, c)
        r = m.propensity_ratios_
        assert r[0] == 1.0 and r[-1] > 3 and np.all(np.diff(r[:5]) > 0)

    def test_checkpoint_keeps_propensities(self, tmp_path, rng):
        X, c, _ = pbm_lists(rng, n=20)
        m = DLARanker(learning_rate=1e-3, propensity_learning_rate=1e-2, max_epochs=2).fit(X, c)
        m.save(tmp_path / "m")
        m2 = DLARanker.load(tmp_path / "m")
        np.testing.assert_array_equal(m2.propensity_logits_, m.propensity_logits_)
        np.testing.assert_array_equal(m2.predict(X), m.predict(X))

    def test_list_length_enforced(self, rng):
        with pytest.raises(ValueError):
            DLARanker().fit(rng.normal(size=(3, 8, 24)), np.zeros((3, 8)))

    def test_eligible_shape(self, rng):
        X, c, _ = pbm_lists(rng, n=5)
        with pytest.raises(ValueError):
            DLARanker().fit(X, c, eligible=np.ones((5, 9)))
