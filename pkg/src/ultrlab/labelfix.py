"""Label correction for non-clicked items, judged by a trained DLA ranker.

Two transforms of the auxiliary score ``a`` of a non-clicked item:

* ``sig``: ``sigmoid(a)``
* ``min``: 1 if ``a`` is at least the smallest score among the query's
  clicked items, else 0 (0 for every item of a click-less query)

Clicked items keep label 1 and remain eligible for propensity weighting.
"""

from __future__ import annotations

import copy

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .corpus_io import LabeledList
from .dla import DLARanker

MODES = ("sig", "min")


def _sigmoid(x):
    return np.exp(-np.logaddexp(0.0, -x))


def correct_label_matrix(aux_scores, clicks, mode="sig"):
    """Vectorised correction over ``(n_queries, list_len)`` arrays.

    Returns ``(labels, eligible)``.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    a = np.asarray(aux_scores, dtype=float)
    c = np.asarray(clicks)
    if a.shape != c.shape:
        raise ValueError("aux scores and clicks differ in shape")
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite auxiliary scores")
    clicked = c > 0
    if mode == "sig":
        fill = _sigmoid(a)
    else:
        min_clicked = np.where(clicked, a, np.inf).min(axis=-1, keepdims=True)
        fill = (a >= min_clicked).astype(float)
    labels = np.where(clicked, 1.0, fill)
    return labels, clicked.astype(int)


def correct_labels(qid, doc_ids, aux_scores, clicks, mode="sig") -> LabeledList:
    """Corrected labels for one query's list."""
    labels, eligible = correct_label_matrix(np.asarray(aux_scores)[None], np.asarray(clicks)[None], mode)
    return LabeledList(qid, list(doc_ids), labels[0].tolist(), eligible[0].tolist())


class LabelCorrector(TransformerMixin, BaseEstimator):
    """Wraps a fitted auxiliary ranker; ``transform(X, clicks)`` returns the
    corrected ``(labels, eligible)`` pair for lists ``X``."""

    def __init__(self, aux_model=None, mode="sig"):
        self.aux_model = aux_model
        self.mode = mode

    def fit(self, X=None, y=None):
        if self.aux_model is None or not hasattr(self.aux_model, "params_"):
            raise ValueError("a fitted auxiliary ranker is required")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        return self

    def transform(self, X, clicks):
        return correct_label_matrix(self.aux_model.predict(X), clicks, self.mode)

    def fit_transform(self, X, clicks):
        return self.fit().transform(X, clicks)


def train_dla_lc(aux_model, X, clicks, init="scratch", mode="sig", eval_set=None, **overrides):
    """Retrain on corrected labels.

    ``scratch`` re-initialises the ranker and propensity model with the
    auxiliary model's hyperparameters; ``aux`` continues from its fitted
    parameters. ``overrides`` replace hyperparameters of the new model.
    Returns ``(model, labels, eligible)``.
    """
    if aux_model is None or not hasattr(aux_model, "params_"):
        raise ValueError("missing auxiliary checkpoint")
    if init not in ("scratch", "aux"):
        raise ValueError("init must be 'scratch' or 'aux'")
    labels, eligible = correct_label_matrix(aux_model.predict(X), clicks, mode)
    if init == "scratch":
        model = DLARanker(**{**aux_model.get_params(), "warm_start": False, **overrides})
    else:
        model = copy.deepcopy(aux_model)
        model.set_params(**{**overrides, "warm_start": True})
    model.fit(X, labels, eligible=eligible, eval_set=eval_set)
    return model, labels, eligible
