"""Assemble fixed-length list arrays from click logs, truth and features."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .corpus_io import FeatureRow
from .textfeat import build_index, extract_features, tokenize


@dataclass
class ListData:
    """Equal-length lists: ``X`` is ``(n, L, d)``, ``y`` is ``(n, L)``."""

    qids: list
    doc_ids: list
    X: np.ndarray
    y: np.ndarray

    def __len__(self):
        return len(self.qids)

    def subset(self, keep) -> "ListData":
        keep = set(keep)
        idx = [i for i, q in enumerate(self.qids) if q in keep]
        return ListData([self.qids[i] for i in idx], [self.doc_ids[i] for i in idx], self.X[idx], self.y[idx])


def compute_features(queries, index, pairs, threads=1) -> dict:
    """``(qid, doc_id) -> 24 features`` for every pair; order-independent."""
    terms = {q.qid: tokenize(q.text) for q in queries}
    pairs = list(dict.fromkeys((q, d) for q, d in pairs))

    def one(pair):
        return np.asarray(extract_features(terms[pair[0]], pair[1], index))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            vecs = list(pool.map(one, pairs))
    else:
        vecs = [one(p) for p in pairs]
    return dict(zip(pairs, vecs))


def feature_rows(features: dict, labels=None) -> list[FeatureRow]:
    labels = labels or {}
    return [FeatureRow(int(labels.get(k, 0)), k[0], tuple(v), k[1]) for k, v in features.items()]


def features_from_rows(rows) -> dict:
    return {(r.qid, r.doc_id): np.asarray(r.features) for r in rows}


def click_lists(logs, features, qids=None) -> ListData:
    keep = None if qids is None else set(qids)
    sel = [log for log in logs if keep is None or log.qid in keep]
    X = np.array([[features[(log.qid, d)] for d in log.ranked_docs] for log in sel]).reshape(len(sel), -1, 24)
    y = np.array([log.clicks for log in sel], dtype=float).reshape(len(sel), -1)
    return ListData([log.qid for log in sel], [list(log.ranked_docs) for log in sel], X, y)


def graded_lists(lists, truth, features, qids=None) -> ListData:
    """``lists`` maps qid to displayed doc ids; labels are truth grades."""
    keep = None if qids is None else set(qids)
    sel = [(q, docs) for q, docs in lists.items() if keep is None or q in keep]
    X = np.array([[features[(q, d)] for d in docs] for q, docs in sel]).reshape(len(sel), -1, 24)
    y = np.array([[truth.get((q, d), 0) for d in docs] for q, docs in sel], dtype=float).reshape(len(sel), -1)
    return ListData([q for q, _ in sel], [list(docs) for _, docs in sel], X, y)


def lists_from_rows(rows, qids=None) -> ListData:
    """Group LETOR rows by qid (file order); all groups must share a length."""
    keep = None if qids is None else set(qids)
    groups: dict = {}
    for r in rows:
        if keep is None or r.qid in keep:
            groups.setdefault(r.qid, []).append(r)
    lengths = {len(g) for g in groups.values()}
    if len(lengths) > 1:
        raise ValueError(f"lists differ in length: {sorted(lengths)}")
    qids_out = list(groups)
    X = np.array([[r.features for r in groups[q]] for q in qids_out], dtype=float).reshape(len(qids_out), -1, 24)
    y = np.array([[r.label for r in groups[q]] for q in qids_out], dtype=float).reshape(len(qids_out), -1)
    return ListData(qids_out, [[r.doc_id for r in groups[q]] for q in qids_out], X, y)


def corpus_features(corpus, threads=1):
    """Index the corpus and featurize every judged (query, list doc) pair."""
    index = build_index(corpus.docs)
    pairs = [(q, d) for q, docs in corpus.lists.items() for d in docs]
    return index, compute_features(corpus.queries, index, pairs, threads)
