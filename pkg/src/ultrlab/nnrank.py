"""Feed-forward scoring network, softmax helpers, AdamW and gradient checking.

The network maps 24 features through a 64-unit projection and hidden layers
of 32, 16 and 8 units (ELU after each) to a linear scalar score. Gradients
are computed by an explicit reverse pass; ``numeric_gradient`` is the
finite-difference oracle used to verify every loss.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .corpus_io import atomic_write_text
from .metrics import mean_ndcg

LAYER_SIZES = (24, 64, 32, 16, 8, 1)
CHECKPOINT_MAGIC = "ultrlab-ranker"
CHECKPOINT_VERSION = 1


# --------------------------------------------------------------------------
# parameters and forward/backward


@dataclass
class RankerParams:
    weights: list = field(default_factory=list)  # (fan_in, fan_out)
    biases: list = field(default_factory=list)

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValueError("weights and biases differ in layer count")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {i}: bad shapes {w.shape}, {b.shape}")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(f"layer {i}: fan_in {w.shape[0]} does not chain")

    @property
    def sizes(self) -> tuple:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def arrays(self) -> list:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    @classmethod
    def from_arrays(cls, arrays) -> "RankerParams":
        return cls(list(arrays[0::2]), list(arrays[1::2]))

    def copy(self) -> "RankerParams":
        return RankerParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def to_vector(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_vector(self, vec) -> "RankerParams":
        arrays, pos = [], 0
        for a in self.arrays():
            arrays.append(np.asarray(vec[pos : pos + a.size], dtype=float).reshape(a.shape))
            pos += a.size
        return RankerParams.from_arrays(arrays)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())


def init_params(rng, sizes=LAYER_SIZES) -> RankerParams:
    """Glorot-uniform weights, zero biases."""
    ws, bs = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        ws.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        bs.append(np.zeros(fan_out))
    return RankerParams(ws, bs)


def zero_params(sizes=LAYER_SIZES) -> RankerParams:
    return RankerParams(
        [np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
        [np.zeros(b) for b in sizes[1:]],
    )


def elu(x):
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def _elu_grad(x):
    return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))


def forward(params: RankerParams, X):
    """Scores for a ``(n, d)`` matrix plus the cache needed by ``backward``."""
    h = np.asarray(X, dtype=float)
    pre_acts, inputs = [], []
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        z = h @ w + b
        if i == last:
            h = z
        else:
            pre_acts.append(z)
            h = elu(z)
    return h[:, 0], (inputs, pre_acts)


def backward(params: RankerParams, cache, dscores) -> RankerParams:
    """Parameter gradients given ``dL/dscores``."""
    inputs, pre_acts = cache
    delta = np.asarray(dscores, dtype=float).reshape(-1, 1)
    gws, gbs = [], []
    for i in range(len(params.weights) - 1, -1, -1):
        gws.append(inputs[i].T @ delta)
        gbs.append(delta.sum(axis=0))
        if i:
            delta = (delta @ params.weights[i].T) * _elu_grad(pre_acts[i - 1])
    return RankerParams(gws[::-1], gbs[::-1])


def score(params: RankerParams, x):
    """Score one feature vector (returns a float) or a ``(n, d)`` batch."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input features")
    if x.ndim == 1:
        return float(forward(params, x[None, :])[0][0])
    return forward(params, x)[0]


# --------------------------------------------------------------------------
# softmax


def log_softmax(scores, axis=-1):
    s = np.asarray(scores, dtype=float)
    m = np.max(s, axis=axis, keepdims=True)
    z = s - m
    return z - np.log(np.sum(np.exp(z), axis=axis, keepdims=True))


def softmax_probs(scores):
    """Numerically stable softmax along the last axis."""
    s = np.asarray(scores, dtype=float)
    if s.size == 0 or s.shape[-1] == 0:
        raise ValueError("softmax of an empty list")
    if not np.all(np.isfinite(s)):
        raise ValueError("non-finite scores")
    return np.exp(log_softmax(s))


def weighted_softmax_ce(scores, targets):
    """``-sum(targets * log_softmax(scores))`` per row, and its score gradient."""
    logp = log_softmax(scores)
    t = np.asarray(targets, dtype=float)
    loss = -np.sum(t * logp, axis=-1)
    grad = np.exp(logp) * np.sum(t, axis=-1, keepdims=True) - t
    return loss, grad


# --------------------------------------------------------------------------
# optimizer


@dataclass
class AdamWState:
    lr: float = 5e-6
    weight_decay: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adamw_update(params, grads, state: AdamWState):
    """One decoupled-weight-decay Adam step over matching lists of arrays.

    Decay is applied first (``p -= lr * wd * p``), then the bias-corrected
    Adam step. Returns ``(new_params, new_state)``; inputs are not mutated.
    """
    params = [np.asarray(p, dtype=float) for p in params]
    grads = [np.asarray(g, dtype=float) for g in grads]
    if len(params) != len(grads) or any(p.shape != g.shape for p, g in zip(params, grads)):
        raise ValueError("params and grads differ in shape")
    m = state.m or [np.zeros_like(p) for p in params]
    v = state.v or [np.zeros_like(p) for p in params]
    if any(a.shape != p.shape for a, p in zip(m, params)) or len(m) != len(params):
        raise ValueError("optimizer state does not match params")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new_p, new_m, new_v = [], [], []
    for p, g, mi, vi in zip(params, grads, m, v):
        mi = b1 * mi + (1.0 - b1) * g
        vi = b2 * vi + (1.0 - b2) * g * g
        p = p - state.lr * state.weight_decay * p
        p = p - state.lr * (mi / c1) / (np.sqrt(vi / c2) + state.eps)
        new_p.append(p)
        new_m.append(mi)
        new_v.append(vi)
    new_state = AdamWState(state.lr, state.weight_decay, b1, b2, state.eps, t, new_m, new_v)
    return new_p, new_state


# --------------------------------------------------------------------------
# gradient oracle


def numeric_gradient(loss_fn, theta, h=1e-4):
    """Central differences ``(L(t + h e_i) - L(t - h e_i)) / 2h`` per coordinate."""
    theta = np.array(theta, dtype=float)
    grad = np.zeros_like(theta)
    flat = theta.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = loss_fn(theta.copy())
        flat[i] = orig - h
        down = loss_fn(theta.copy())
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def relative_error(analytic, numeric, floor=1e-6):
    """Elementwise ``|a - n| / max(|a|, |n|, floor)``."""
    a = np.asarray(analytic, dtype=float)
    n = np.asarray(numeric, dtype=float)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


# --------------------------------------------------------------------------
# checkpoints


def _fmt(values):
    return " ".join(repr(float(v)) for v in np.ravel(values))


def _parse(line, n, what):
    vals = [float(v) for v in line.split()]
    if len(vals) != n:
        raise ValueError(f"checkpoint: {what} expects {n} values, got {len(vals)}")
    return np.asarray(vals)


def save_checkpoint(path, params: RankerParams, scaler=None, propensity=None, meta=None):
    """Text dump: header, optional scaler, one block per layer, optional
    propensity logits. Values are written with ``repr`` so they round-trip."""
    lines = [f"{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}"]
    for k, v in sorted((meta or {}).items()):
        lines.append(f"meta {k} {v}")
    if scaler is not None:
        mean, scale = scaler
        lines += [f"scaler {len(mean)}", _fmt(mean), _fmt(scale)]
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        lines += [f"layer {i} {w.shape[0]} {w.shape[1]}", _fmt(w), _fmt(b)]
    if propensity is not None:
        lines += [f"propensity {len(propensity)}", _fmt(propensity)]
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_checkpoint(path):
    """Returns ``(params, scaler, propensity, meta)``."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].split() != [CHECKPOINT_MAGIC, str(CHECKPOINT_VERSION)]:
        raise ValueError(f"{path}: not a version-{CHECKPOINT_VERSION} ranker checkpoint")
    meta, scaler, propensity = {}, None, None
    ws, bs = [], []
    i = 1
    while i < len(lines):
        head = lines[i].split()
        if not head:
            i += 1
            continue
        if head[0] == "meta":
            meta[head[1]] = " ".join(head[2:])
            i += 1
        elif head[0] == "scaler":
            n = int(head[1])
            scaler = (_parse(lines[i + 1], n, "scaler mean"), _parse(lines[i + 2], n, "scaler scale"))
            i += 3
        elif head[0] == "layer":
            idx, fin, fout = (int(x) for x in head[1:4])
            if idx != len(ws):
                raise ValueError(f"checkpoint: layer {idx} out of order")
            ws.append(_parse(lines[i + 1], fin * fout, f"layer {idx} weights").reshape(fin, fout))
            bs.append(_parse(lines[i + 2], fout, f"layer {idx} biases"))
            i += 3
        elif head[0] == "propensity":
            propensity = _parse(lines[i + 1], int(head[1]), "propensity")
            i += 2
        else:
            raise ValueError(f"checkpoint: unknown block {head[0]!r}")
    return RankerParams(ws, bs), scaler, propensity, meta


# --------------------------------------------------------------------------
# estimator


def check_lists(X, y=None, n_features=None):
    """Validate a ``(n_queries, list_len, n_features)`` array (and labels)."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 3:
        raise ValueError(f"expected a 3-D array (queries, list, features), got shape {X.shape}")
    if n_features is not None and X.shape[2] != n_features:
        raise ValueError(f"expected {n_features} features, got {X.shape[2]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("features contain NaN or inf")
    if y is None:
        return X
    y = np.asarray(y, dtype=float)
    if y.shape != X.shape[:2]:
        raise ValueError(f"labels shape {y.shape} does not match lists {X.shape[:2]}")
    if not np.all(np.isfinite(y)):
        raise ValueError("labels contain NaN or inf")
    return X, y


class NeuralRanker(BaseEstimator):
    """Listwise softmax cross-entropy ranker over the feed-forward network.

    ``fit(X, y)`` takes lists ``X`` of shape ``(n_queries, list_len, 24)`` and
    non-negative per-item labels ``y``; the per-query loss is
    ``-sum(y * log_softmax(f))`` and a batch loss is the mean over its queries.
    With ``eval_set=(X_valid, grades_valid)`` the parameters with the best
    validation nDCG@10 (checked after every epoch, and before the first) are
    kept, and training stops after ``patience`` epochs without improvement.
    """

    def __init__(
        self,
        learning_rate=5e-6,
        weight_decay=0.01,
        batch_size=16,
        max_epochs=50,
        patience=5,
        standardize=True,
        warm_start=False,
        random_state=0,
    ):
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.standardize = standardize
        self.warm_start = warm_start
        self.random_state = random_state

    # -- hooks for subclasses ------------------------------------------------

    def _init_extra(self, rng):
        pass

    def _snapshot_extra(self):
        return None

    def _restore_extra(self, snap):
        pass

    def _batch_step(self, scores, y, extra):
        """Return ``(losses_dict, dL/dscores)`` for one batch; may update
        non-network state."""
        loss, grad = weighted_softmax_ce(scores, y)
        n = scores.shape[0]
        return {"ranking_loss": float(loss.mean())}, grad / n

    # -- core ----------------------------------------------------------------

    def _transform(self, X):
        return (X - self.scaler_mean_) / self.scaler_scale_

    def fit(self, X, y, eval_set=None, **fit_extra):
        X, y = check_lists(X, y)
        if np.any(y < 0):
            raise ValueError("labels must be non-negative")
        rng = np.random.default_rng(self.random_state)
        n_q, list_len, n_feat = X.shape
        resume = self.warm_start and hasattr(self, "params_")
        if resume:
            if n_feat != self.n_features_in_:
                raise ValueError("warm start with a different feature count")
        else:
            self.n_features_in_ = n_feat
            flat = X.reshape(-1, n_feat)
            if self.standardize:
                self.scaler_mean_ = flat.mean(axis=0)
                scale = flat.std(axis=0)
                self.scaler_scale_ = np.where(scale > 1e-12, scale, 1.0)
            else:
                self.scaler_mean_ = np.zeros(n_feat)
                self.scaler_scale_ = np.ones(n_feat)
            self.params_ = init_params(rng, (n_feat,) + LAYER_SIZES[1:])
        if not resume:
            self._init_extra(rng)
        extra = self._prepare_extra(fit_extra, X.shape[:2])

        Z = self._transform(X).reshape(n_q * list_len, n_feat)
        state = AdamWState(lr=self.learning_rate, weight_decay=self.weight_decay)
        self.history_ = []
        best = (-np.inf, self.params_.copy(), self._snapshot_extra(), 0)
        if eval_set is not None:
            Xv, gv = check_lists(*eval_set)
            best = (self.score(Xv, gv), best[1], best[2], 0)
            self.history_.append(self._record(0, {}, best[0]))
        stale = 0
        for epoch in range(1, self.max_epochs + 1):
            order = rng.permutation(n_q)
            sums: dict = {}
            for start in range(0, n_q, self.batch_size):
                idx = order[start : start + self.batch_size]
                rows = (idx[:, None] * list_len + np.arange(list_len)).ravel()
                scores, cache = forward(self.params_, Z[rows])
                scores = scores.reshape(len(idx), list_len)
                losses, dscores = self._batch_step(scores, y[idx], {k: v[idx] for k, v in extra.items()})
                grads = backward(self.params_, cache, dscores.ravel())
                arrays, state = adamw_update(self.params_.arrays(), grads.arrays(), state)
                self.params_ = RankerParams.from_arrays(arrays)
                for k, v in losses.items():
                    sums[k] = sums.get(k, 0.0) + v * len(idx)
            epoch_losses = {k: v / n_q for k, v in sums.items()}
            if not self.params_.is_finite():
                raise FloatingPointError(f"parameters diverged at epoch {epoch}")
            if eval_set is None:
                self.history_.append(self._record(epoch, epoch_losses, None))
                continue
            val = self.score(Xv, gv)
            self.history_.append(self._record(epoch, epoch_losses, val))
            if val > best[0]:
                best = (val, self.params_.copy(), self._snapshot_extra(), epoch)
                stale = 0
            else:
                stale += 1
                if stale >= self.patience:
                    break
        if eval_set is not None:
            self.best_score_, self.params_, snap, self.best_epoch_ = best
            self._restore_extra(snap)
        else:
            self.best_epoch_ = len(self.history_)
        return self

    def _prepare_extra(self, fit_extra, shape):
        if fit_extra:
            raise TypeError(f"unexpected fit arguments {sorted(fit_extra)}")
        return {}

    def _record(self, epoch, losses, val):
        rec = {"epoch": epoch}
        rec.update({k: float(v) for k, v in losses.items()})
        rec["valid_ndcg10"] = None if val is None else float(val)
        return rec

    def predict(self, X):
        """Scores with the trailing feature axis removed."""
        check_is_fitted(self, "params_")
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} features, got {X.shape[-1]}")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain NaN or inf")
        flat = self._transform(X.reshape(-1, X.shape[-1]))
        return forward(self.params_, flat)[0].reshape(X.shape[:-1])

    def score(self, X, y):
        """Mean nDCG@10 of the predicted order against graded labels ``y``."""
        return mean_ndcg(self.predict(X), y, k=10)

    # -- persistence ----------------------------------------------------------

    def _checkpoint_propensity(self):
        return None

    def save(self, path):
        check_is_fitted(self, "params_")
        save_checkpoint(
            path,
            self.params_,
            scaler=(self.scaler_mean_, self.scaler_scale_),
            propensity=self._checkpoint_propensity(),
            meta={"class": type(self).__name__},
        )

    @classmethod
    def load(cls, path, **params):
        net, scaler, propensity, _ = load_checkpoint(path)
        est = cls(**params)
        est.params_ = net
        est.n_features_in_ = net.sizes[0]
        if scaler is None:
            scaler = (np.zeros(est.n_features_in_), np.ones(est.n_features_in_))
        est.scaler_mean_, est.scaler_scale_ = scaler
        est._load_propensity(propensity)
        return est

    def _load_propensity(self, propensity):
        pass

    def clone_fitted(self):
        return copy.deepcopy(self)
