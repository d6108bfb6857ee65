"""List reconstruction with random and BM25 hard negatives.

Clicked items are treated as relevant and every newly added document as
irrelevant; position bias is deliberately ignored. Two schemes decide which
displayed items survive:

* ``click_only`` keeps only the clicked items;
* ``last_click`` keeps positions 1 through the last click.

Removed slots are refilled with random negatives up to ten items, then
``n_random`` extra random and ``n_hard`` hard negatives are appended, so all
lists of one run have length ``10 + n_random + n_hard``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._utils import derived_rng
from .corpus_io import LIST_LEN
from .datasets import ListData
from .nnrank import NeuralRanker, log_softmax
from .textfeat import extract_features, retrieve_topk

log = logging.getLogger(__name__)

SCHEMES = ("click_only", "last_click")
ORIGINS = ("kept", "random_neg", "hard_neg")
DEFAULT_POOL_SIZE = 200


@dataclass(frozen=True)
class NegSpec:
    scheme: str = "click_only"
    n_hard: int = 50
    n_random: int = 0
    seed: int = 0
    pool_size: int = DEFAULT_POOL_SIZE

    def __post_init__(self):
        scheme = self.scheme.replace("-", "_")
        object.__setattr__(self, "scheme", scheme)
        if scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not 0 <= self.n_hard <= 200:
            raise ValueError("n_hard must lie in [0, 200]")
        if self.n_random < 0:
            raise ValueError("n_random must be >= 0")
        if self.pool_size < 1:
            raise ValueError("pool_size must be >= 1")

    @property
    def list_len(self) -> int:
        return LIST_LEN + self.n_random + self.n_hard


@dataclass(frozen=True)
class ReconstructedList:
    qid: str
    entries: tuple  # (doc_id, label, origin)

    def __post_init__(self):
        seen = set()
        for doc_id, label, origin in self.entries:
            if doc_id in seen:
                raise ValueError(f"duplicate doc {doc_id!r} in list for {self.qid!r}")
            seen.add(doc_id)
            if origin not in ORIGINS:
                raise ValueError(f"unknown origin {origin!r}")
            if label not in (0, 1) or (label == 1 and origin != "kept"):
                raise ValueError("only kept clicked items may be labelled 1")

    @property
    def doc_ids(self) -> list:
        return [e[0] for e in self.entries]

    @property
    def labels(self) -> list:
        return [e[1] for e in self.entries]

    def __len__(self):
        return len(self.entries)


def sample_hard_negatives(candidates, n, seed=0, exclude=()):
    """Pick ``n`` hard negatives from ``(doc_id, score)`` candidates.

    The highest- and lowest-scoring candidates are always taken. Each of the
    remaining picks draws a target score from a normal fitted to the
    candidate scores and takes the closest unused candidate (ties to the
    smaller doc id). ``seed`` may be an int or a numpy ``Generator``.
    Returns every candidate when fewer than ``n`` remain after ``exclude``.
    """
    exclude = set(exclude)
    pool = sorted(((d, float(s)) for d, s in candidates if d not in exclude), key=lambda c: c[0])
    if n <= 0:
        return []
    if len(pool) <= n:
        return [d for d, _ in sorted(pool, key=lambda c: (-c[1], c[0]))]
    ids = [d for d, _ in pool]
    scores = np.array([s for _, s in pool])
    used = np.zeros(len(pool), dtype=bool)
    # argmax/argmin return the first hit, i.e. the smallest doc id on ties
    picks = [int(np.argmax(scores))]
    if n >= 2:
        lo = int(np.argmin(scores))
        if lo == picks[0]:
            lo = int(np.argmin(np.where(np.arange(len(pool)) == lo, np.inf, scores)))
        picks.append(lo)
    used[picks] = True
    rng = np.random.default_rng(seed)
    mu, sd = scores.mean(), scores.std()
    while len(picks) < n:
        target = rng.normal(mu, sd)
        dist = np.where(used, np.inf, np.abs(scores - target))
        i = int(np.argmin(dist))
        used[i] = True
        picks.append(i)
    return [ids[i] for i in picks]


def _draw_random(pool, k, rng, exclude):
    """``k`` distinct docs drawn uniformly from ``pool`` outside ``exclude``."""
    if k <= 0:
        return []
    taken, out = set(exclude), []
    tries = 0
    while len(out) < k:
        d = pool[int(rng.integers(len(pool)))]
        tries += 1
        if d not in taken:
            taken.add(d)
            out.append(d)
        elif tries > 50 * (k + len(pool)):
            raise ValueError(f"random pool too small: need {k} negatives")
    return out


def kept_items(clicks, scheme):
    """Positions that survive reconstruction under ``scheme``."""
    clicked = np.flatnonzero(np.asarray(clicks) > 0)
    if clicked.size == 0:
        return []
    if scheme == "click_only":
        return clicked.tolist()
    return list(range(int(clicked[-1]) + 1))


def reconstruct_list(click_log, spec: NegSpec, random_pool, hard_negs, seed=None):
    """Rebuild one query's list; ``None`` when it has no click to keep.

    A shortfall of hard negatives is made up with extra random negatives so
    the list length stays fixed.
    """
    keep = kept_items(click_log.clicks, spec.scheme)
    if not keep:
        return None
    rng = derived_rng(spec.seed if seed is None else seed, click_log.qid)
    entries = [(click_log.ranked_docs[i], int(click_log.clicks[i]), "kept") for i in keep]
    hard = [d for d in hard_negs if d not in set(click_log.ranked_docs)][: spec.n_hard]
    n_fill = LIST_LEN - len(entries) + spec.n_random + (spec.n_hard - len(hard))
    banned = set(click_log.ranked_docs) | set(hard)
    if n_fill and not len(random_pool):
        raise ValueError("random pool is empty")
    entries += [(d, 0, "random_neg") for d in _draw_random(random_pool, n_fill, rng, banned)]
    entries += [(d, 0, "hard_neg") for d in hard]
    return ReconstructedList(click_log.qid, tuple(entries))


def listwise_loss(scores, labels):
    """``-sum`` of log-softmax over the positive items of one list."""
    labels = np.asarray(labels, dtype=float)
    if not np.any(labels > 0):
        raise ValueError("list has no positive item")
    return float(-np.sum(labels * log_softmax(np.asarray(scores, dtype=float))))


def listwise_loss_grad(scores, labels):
    labels = np.asarray(labels, dtype=float)
    p = np.exp(log_softmax(np.asarray(scores, dtype=float)))
    return p * labels.sum() - labels


def reconstruct_all(logs, queries, index, spec: NegSpec, threads=1):
    """Reconstructed lists for every click log with at least one kept click.

    ``queries`` maps qid to query text. Returns ``(lists, n_skipped)``.
    """
    random_pool = list(index.doc_ids)

    def one(cl):
        if not kept_items(cl.clicks, spec.scheme):
            return None
        hard = []
        if spec.n_hard:
            cands = retrieve_topk(queries[cl.qid], index, spec.pool_size + LIST_LEN)
            cands = [c for c in cands if c[0] not in set(cl.ranked_docs)][: spec.pool_size]
            hard = sample_hard_negatives(cands, spec.n_hard, derived_rng(spec.seed + 1, cl.qid))
        return reconstruct_list(cl, spec, random_pool, hard)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        out = list(ex.map(one, logs))
    lists = [r for r in out if r is not None]
    skipped = len(out) - len(lists)
    if skipped:
        log.info("skipped %d queries without a kept click", skipped)
    return lists, skipped


def reconstructed_data(lists, queries, index, features=None, threads=1) -> ListData:
    """Stack reconstructed lists into arrays, extracting missing features."""
    if not lists:
        raise ValueError("no reconstructed lists")
    features = {} if features is None else features
    lengths = {len(r) for r in lists}
    if len(lengths) != 1:
        raise ValueError("reconstructed lists differ in length")
    pairs = [(r.qid, d) for r in lists for d in r.doc_ids]

    def feat(pair):
        f = features.get(pair)
        return f if f is not None else extract_features(queries[pair[0]], pair[1], index)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as ex:
        rows = list(ex.map(feat, pairs, chunksize=256))
    L = lengths.pop()
    X = np.asarray(rows, dtype=float).reshape(len(lists), L, -1)
    y = np.asarray([r.labels for r in lists], dtype=float)
    return ListData([r.qid for r in lists], [r.doc_ids for r in lists], X, y)


def train_negsample(logs, queries, index, spec: NegSpec, features=None, eval_set=None, threads=1, **params):
    """Fit a listwise ranker on reconstructed lists.

    Returns ``(model, data, n_skipped)``; ``params`` go to ``NeuralRanker``.
    """
    lists, skipped = reconstruct_all(logs, queries, index, spec, threads)
    data = reconstructed_data(lists, queries, index, features, threads)
    model = NeuralRanker(**params).fit(data.X, data.y, eval_set=eval_set)
    return model, data, skipped
