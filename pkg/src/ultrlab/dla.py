"""Dual Learning Algorithm: a ranker and a per-position propensity model
trained together with mutually inverse-propensity-weighted softmax losses.

The ranking loss weights each clicked item by ``P(o_1)/P(o_x)`` from the
propensity model; the observation loss weights each click by
``P(r_1)/P(r_x)`` from the ranker. Each weight is a constant with respect to
the model it multiplies.
"""

from __future__ import annotations

import numpy as np

from .corpus_io import LIST_LEN
from .nnrank import AdamWState, NeuralRanker, adamw_update, log_softmax, softmax_probs

DEFAULT_IPW_CAP = 10.0


def propensity_probs(logits):
    """Softmax over the per-position examination logits."""
    logits = np.asarray(logits, dtype=float)
    if logits.shape != (LIST_LEN,):
        raise ValueError(f"expected {LIST_LEN} position logits, got shape {logits.shape}")
    return softmax_probs(logits)


def ipw_rank_weights(probs, cap=DEFAULT_IPW_CAP):
    """``min(p[0] / p[x], cap)`` along the last axis; position 1 gets exactly 1."""
    p = np.asarray(probs, dtype=float)
    if np.any(p <= 0):
        raise ValueError("propensities must be positive")
    w = np.minimum(p[..., :1] / p, cap)
    w[..., 0] = 1.0
    return w


def ranking_loss(scores, clicks, rank_weights):
    """``-sum_{clicked x} w_x * log softmax(scores)_x`` for one list (or a
    batch along the leading axis). Labels may be real-valued."""
    logp = log_softmax(scores)
    return -np.sum(np.asarray(clicks, dtype=float) * np.asarray(rank_weights, dtype=float) * logp, axis=-1)


def ranking_loss_grad(scores, clicks, rank_weights):
    t = np.asarray(clicks, dtype=float) * np.asarray(rank_weights, dtype=float)
    p = np.exp(log_softmax(scores))
    return p * t.sum(axis=-1, keepdims=True) - t


def observation_loss(obs_logits, clicks, relevance_weights):
    """Mirror of ``ranking_loss`` with the propensity logits as the scored
    quantity and relevance ratios as weights."""
    return ranking_loss(obs_logits, clicks, relevance_weights)


def observation_loss_grad(obs_logits, clicks, relevance_weights):
    """Gradient w.r.t. the shared position logits, summed over any batch axis."""
    g = ranking_loss_grad(np.broadcast_to(obs_logits, np.shape(clicks)), clicks, relevance_weights)
    return g.reshape(-1, np.shape(clicks)[-1]).sum(axis=0)


class DLARanker(NeuralRanker):
    """Ranker and position-propensity model trained jointly from clicks.

    ``fit(X, clicks, eligible=None, eval_set=None)``: ``X`` has shape
    ``(n_queries, 10, 24)`` in displayed order, ``clicks`` holds per-item
    labels (binary clicks, or corrected soft labels). ``eligible`` marks items
    whose label came from an actual click; those receive the IPW weight and
    drive the observation loss, while other labelled items enter the ranking
    loss with weight 1. By default ``eligible`` is ``clicks > 0``.

    Both models are updated from the same batch at every step. The
    propensity logits use AdamW without weight decay at
    ``propensity_learning_rate`` (defaults to ``learning_rate``).
    """

    def __init__(
        self,
        learning_rate=5e-6,
        propensity_learning_rate=None,
        weight_decay=0.01,
        ipw_cap=DEFAULT_IPW_CAP,
        batch_size=16,
        max_epochs=50,
        patience=5,
        standardize=True,
        warm_start=False,
        random_state=0,
    ):
        super().__init__(
            learning_rate=learning_rate,
            weight_decay=weight_decay,
            batch_size=batch_size,
            max_epochs=max_epochs,
            patience=patience,
            standardize=standardize,
            warm_start=warm_start,
            random_state=random_state,
        )
        self.propensity_learning_rate = propensity_learning_rate
        self.ipw_cap = ipw_cap

    def _init_extra(self, rng):
        self.propensity_logits_ = np.zeros(LIST_LEN)

    def _snapshot_extra(self):
        return self.propensity_logits_.copy()

    def _restore_extra(self, snap):
        self.propensity_logits_ = snap

    def _prepare_extra(self, fit_extra, shape):
        if shape[1] != LIST_LEN:
            raise ValueError(f"DLA needs lists of exactly {LIST_LEN} items, got {shape[1]}")
        eligible = fit_extra.pop("eligible", None)
        super()._prepare_extra(fit_extra, shape)
        self._prop_state = AdamWState(
            lr=self.learning_rate if self.propensity_learning_rate is None else self.propensity_learning_rate,
            weight_decay=0.0,
        )
        if eligible is None:
            return {}
        eligible = np.asarray(eligible)
        if eligible.shape != shape:
            raise ValueError("eligible must match the label shape")
        return {"eligible": (eligible > 0).astype(float)}

    def _batch_step(self, scores, y, extra):
        n = scores.shape[0]
        eligible = extra.get("eligible")
        if eligible is None:
            eligible = (y > 0).astype(float)
        obs = propensity_probs(self.propensity_logits_)
        w_rank = ipw_rank_weights(obs, self.ipw_cap)
        weights = np.where(eligible > 0, w_rank[None, :], 1.0)
        r_loss = ranking_loss(scores, y, weights)
        d_scores = ranking_loss_grad(scores, y, weights) / n

        w_rel = ipw_rank_weights(softmax_probs(scores), self.ipw_cap)
        obs_labels = y * eligible
        o_loss = observation_loss(np.broadcast_to(self.propensity_logits_, scores.shape), obs_labels, w_rel)
        d_logits = observation_loss_grad(self.propensity_logits_, obs_labels, w_rel) / n
        (self.propensity_logits_,), self._prop_state = adamw_update(
            [self.propensity_logits_], [d_logits], self._prop_state
        )
        return {"ranking_loss": float(r_loss.mean()), "observation_loss": float(o_loss.mean())}, d_scores

    def _record(self, epoch, losses, val):
        rec = super()._record(epoch, losses, val)
        rec["propensity_ratios"] = [float(v) for v in self.propensity_ratios_]
        return rec

    @property
    def propensities_(self):
        return propensity_probs(self.propensity_logits_)

    @property
    def propensity_ratios_(self):
        """``p[1] / p[k]`` for k = 1..10."""
        p = self.propensities_
        return p[0] / p

    def _checkpoint_propensity(self):
        return self.propensity_logits_

    def _load_propensity(self, propensity):
        self.propensity_logits_ = np.zeros(LIST_LEN) if propensity is None else np.asarray(propensity, dtype=float)
