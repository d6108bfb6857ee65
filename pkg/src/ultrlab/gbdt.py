"""Gradient boosted regression trees with the LambdaRank objective.

Trees are grown greedily with exact second-order split search; each leaf
holds ``-sum(g) / (sum(h) + l2_leaf)`` where ``g`` and ``h`` are the
per-document gradient (``-lambda``) and hessian.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._utils import qid_unit
from .metrics import ndcg_of_scores

FORMAT_HEADER = "ultrlab-gbdt 1"
FEATURE_SETS = ("base", "base_plus_model_score")


def _discounts(n, k):
    d = 1.0 / np.log2(np.arange(2, n + 2))
    d[k:] = 0.0
    return d


def lambdarank_gradients(scores, labels, k=10):
    """Per-document ``(lambdas, hessians)`` for one query.

    For every pair with ``label_i > label_j``, ``rho = 1 / (1 + exp(s_i - s_j))``
    and ``|dNDCG|`` is the nDCG@k change from swapping the two in the current
    ranking. ``i`` gains ``rho * |dNDCG|`` and ``j`` loses it; both hessians
    gain ``rho * (1 - rho) * |dNDCG|``. Lambdas point in the direction that
    raises the score of better documents.
    """
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels, dtype=float)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be matching 1-d arrays")
    n = len(s)
    lam, hess = np.zeros(n), np.zeros(n)
    if n < 2 or np.all(y == y[0]):
        return lam, hess
    gains = 2.0**y - 1.0
    ideal = float(np.sum(np.sort(gains)[::-1] * _discounts(n, k)))
    if ideal <= 0:
        return lam, hess
    order = np.argsort(-s, kind="stable")
    disc = np.empty(n)
    disc[order] = _discounts(n, k)
    delta = np.abs((gains[:, None] - gains[None, :]) * (disc[:, None] - disc[None, :])) / ideal
    better = y[:, None] > y[None, :]
    # rho = sigmoid(s_j - s_i), computed stably
    rho = np.exp(-np.logaddexp(0.0, s[:, None] - s[None, :]))
    pair = np.where(better, rho * delta, 0.0)
    curv = np.where(better, rho * (1.0 - rho) * delta, 0.0)
    lam = pair.sum(axis=1) - pair.sum(axis=0)
    hess = curv.sum(axis=1) + curv.sum(axis=0)
    return lam, hess


@dataclass
class RegressionTree:
    """Flat binary tree: ``feature[i] < 0`` marks a leaf. Rows with
    ``x[feature] <= threshold`` go left."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        def rec(i):
            return 0 if self.feature[i] < 0 else 1 + max(rec(self.left[i]), rec(self.right[i]))

        return rec(0)

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        node = np.zeros(len(X), dtype=int)
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return self.value[node]
            rows = np.flatnonzero(inner)
            go_left = X[rows, f[rows]] <= self.threshold[node[rows]]
            node[rows] = np.where(go_left, self.left[node[rows]], self.right[node[rows]])


def _best_split(X, g, h, l2, min_leaf):
    """Exact search; returns ``(gain, feature, threshold)`` or ``None``."""
    n = len(g)
    G, H = g.sum(), h.sum()
    parent = G * G / (H + l2)
    best = None
    for f in range(X.shape[1]):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        gl = np.cumsum(g[order])[:-1]
        hl = np.cumsum(h[order])[:-1]
        gain = 0.5 * (gl * gl / (hl + l2) + (G - gl) ** 2 / (H - hl + l2) - parent)
        n_left = np.arange(1, n)
        ok = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
        if not ok.any():
            continue
        gain = np.where(ok, gain, -np.inf)
        i = int(np.argmax(gain))
        if gain[i] > 0 and (best is None or gain[i] > best[0]):
            best = (float(gain[i]), f, 0.5 * (xs[i] + xs[i + 1]))
    return best


def fit_tree(X, grad, hess, max_depth=4, min_leaf_samples=5, l2_leaf=1.0) -> RegressionTree:
    """Greedy depth-first tree on gradients ``grad`` and hessians ``hess``."""
    X = np.asarray(X, dtype=float)
    g = np.asarray(grad, dtype=float)
    h = np.asarray(hess, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("need a nonempty 2-d feature matrix")
    if not (len(g) == len(h) == len(X)):
        raise ValueError("gradients, hessians and rows differ in length")
    feature, threshold, left, right, value = [], [], [], [], []

    def grow(idx, depth):
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(-g[idx].sum() / (h[idx].sum() + l2_leaf))
        if depth >= max_depth or len(idx) < 2 * min_leaf_samples:
            return node
        split = _best_split(X[idx], g[idx], h[idx], l2_leaf, max(1, min_leaf_samples))
        if split is None:
            return node
        _, f, thr = split
        mask = X[idx, f] <= thr
        feature[node], threshold[node] = f, thr
        left[node] = grow(idx[mask], depth + 1)
        right[node] = grow(idx[~mask], depth + 1)
        return node

    grow(np.arange(len(X)), 0)
    return RegressionTree(
        np.array(feature, dtype=int),
        np.array(threshold, dtype=float),
        np.array(left, dtype=int),
        np.array(right, dtype=int),
        np.array(value, dtype=float),
    )


def split_qids(qids, train_fraction=0.8, seed=0):
    """Whole-query train/valid partition by seeded qid hash."""
    uniq = sorted(set(qids))
    if len(uniq) < 2:
        raise ValueError("need at least 2 queries to split")
    u = {q: qid_unit(q, seed) for q in uniq}
    train = {q for q in uniq if u[q] < train_fraction}
    if not train:
        train = {min(uniq, key=u.get)}
    if train == set(uniq):
        train.discard(max(uniq, key=u.get))
    return train, set(uniq) - train


def _groups(qids):
    groups: dict = {}
    for i, q in enumerate(qids):
        groups.setdefault(q, []).append(i)
    return [np.array(v) for v in groups.values()]


def _mean_ndcg(scores, y, groups, k):
    if not groups:
        return float("nan")
    return float(np.mean([ndcg_of_scores(scores[g], y[g], k) for g in groups]))


def add_model_score(X, model_scores):
    """Append one column of neural model scores to the base features."""
    X = np.asarray(X, dtype=float)
    s = np.asarray(model_scores, dtype=float).reshape(-1, 1)
    if len(s) != len(X):
        raise ValueError("one model score per row is required")
    return np.hstack([X, s])


class LambdaMART(BaseEstimator):
    """Boosted trees trained on graded labels with LambdaRank gradients.

    ``fit(X, y, qid)`` splits queries 80/20 by seeded qid hash, boosts on the
    larger part and keeps the number of trees with the best nDCG@k on the
    smaller part (stopping after ``early_stopping_rounds`` without gain).
    """

    def __init__(
        self,
        n_trees=300,
        max_depth=4,
        min_leaf_samples=5,
        learning_rate=0.2,
        l2_leaf=1e-3,
        train_fraction=0.8,
        early_stopping_rounds=30,
        k=10,
        random_state=0,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf_samples = min_leaf_samples
        self.learning_rate = learning_rate
        self.l2_leaf = l2_leaf
        self.train_fraction = train_fraction
        self.early_stopping_rounds = early_stopping_rounds
        self.k = k
        self.random_state = random_state

    def _validate(self):
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.max_depth < 0 or self.min_leaf_samples < 1 or self.l2_leaf < 0:
            raise ValueError("invalid tree parameters")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ValueError("train_fraction must lie in (0, 1]")

    def fit(self, X, y, qid):
        self._validate()
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        qid = np.asarray(qid).astype(str)
        if X.ndim != 2 or len(X) != len(y) or len(y) != len(qid):
            raise ValueError("X, y and qid must have matching lengths")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain NaN or inf")
        if np.any(y < 0):
            raise ValueError("labels must be non-negative grades")
        self.n_features_in_ = X.shape[1]
        if self.train_fraction < 1.0:
            train_q, valid_q = split_qids(qid, self.train_fraction, self.random_state)
        else:
            train_q, valid_q = set(qid), set()
        self.train_qids_, self.valid_qids_ = sorted(train_q), sorted(valid_q)
        tr = np.isin(qid, self.train_qids_)
        Xt, yt, gt = X[tr], y[tr], _groups(qid[tr])
        Xv, yv, gv = X[~tr], y[~tr], _groups(qid[~tr])

        st, sv = np.zeros(len(yt)), np.zeros(len(yv))
        self.trees_, self.history_ = [], []
        best, best_n, stale = -np.inf, 0, 0
        for t in range(1, self.n_trees + 1):
            lam, hess = np.zeros(len(yt)), np.zeros(len(yt))
            for g in gt:
                lam[g], hess[g] = lambdarank_gradients(st[g], yt[g], self.k)
            tree = fit_tree(Xt, -lam, hess, self.max_depth, self.min_leaf_samples, self.l2_leaf)
            self.trees_.append(tree)
            st += self.learning_rate * tree.predict(Xt)
            rec = {"tree": t, "train_ndcg": _mean_ndcg(st, yt, gt, self.k)}
            if len(yv):
                sv += self.learning_rate * tree.predict(Xv)
                rec["valid_ndcg"] = _mean_ndcg(sv, yv, gv, self.k)
                if rec["valid_ndcg"] > best:
                    best, best_n, stale = rec["valid_ndcg"], t, 0
                else:
                    stale += 1
            self.history_.append(rec)
            if len(yv) and stale >= self.early_stopping_rounds:
                break
        if len(yv):
            self.trees_ = self.trees_[:best_n]
            self.best_score_ = best
        self.best_iteration_ = len(self.trees_)
        return self

    def predict(self, X):
        check_is_fitted(self, "trees_")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features")
        out = np.zeros(len(X))
        for tree in self.trees_:
            out += self.learning_rate * tree.predict(X)
        return out

    def score(self, X, y, qid):
        """Mean nDCG@k over the queries in ``qid``."""
        y = np.asarray(y, dtype=float)
        return _mean_ndcg(self.predict(X), y, _groups(np.asarray(qid).astype(str)), self.k)

    # -- persistence ----------------------------------------------------------

    def dumps(self) -> str:
        check_is_fitted(self, "trees_")
        lines = [
            FORMAT_HEADER,
            f"n_features {self.n_features_in_}",
            f"learning_rate {self.learning_rate!r}",
            f"trees {len(self.trees_)}",
        ]
        for i, t in enumerate(self.trees_):
            lines.append(f"tree {i} {t.n_nodes}")
            for j in range(t.n_nodes):
                lines.append(
                    f"{j} {t.feature[j]} {float(t.threshold[j])!r} {t.left[j]} {t.right[j]} {float(t.value[j])!r}"
                )
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text, **params) -> "LambdaMART":
        lines = text.splitlines()
        if not lines or lines[0] != FORMAT_HEADER:
            raise ValueError("not an ultrlab-gbdt 1 model")
        try:
            n_features = int(lines[1].split()[1])
            lr = float(lines[2].split()[1])
            n_trees = int(lines[3].split()[1])
            pos, trees = 4, []
            for i in range(n_trees):
                tag, idx, n_nodes = lines[pos].split()
                if tag != "tree" or int(idx) != i:
                    raise ValueError(f"expected tree {i}")
                rows = [ln.split() for ln in lines[pos + 1 : pos + 1 + int(n_nodes)]]
                if len(rows) != int(n_nodes):
                    raise ValueError("truncated tree")
                trees.append(
                    RegressionTree(
                        np.array([int(r[1]) for r in rows]),
                        np.array([float(r[2]) for r in rows]),
                        np.array([int(r[3]) for r in rows]),
                        np.array([int(r[4]) for r in rows]),
                        np.array([float(r[5]) for r in rows]),
                    )
                )
                pos += 1 + int(n_nodes)
        except (IndexError, ValueError) as exc:
            raise ValueError(f"malformed model file: {exc}") from None
        est = cls(**{**params, "learning_rate": lr})
        est.n_features_in_ = n_features
        est.trees_ = trees
        est.best_iteration_ = len(trees)
        return est

    def save(self, path):
        path = os.fspath(path)
        fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())
        os.replace(tmp, path)

    @classmethod
    def load(cls, path, **params) -> "LambdaMART":
        with open(path, encoding="utf-8") as fh:
            return cls.loads(fh.read(), **params)
