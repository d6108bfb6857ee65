"""Tokenization, a small in-memory inverted index, and 24 lexical match features.

Feature layout (8 per field, fields ordered title, abstract, combined)::

    sum_tf, sum_tf_norm, sum_tfidf, log_len, bm25, lm_jm, lm_dir, lm_abs

``combined`` is the concatenation of title and abstract tokens.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

FIELDS = ("title", "abstract", "combined")
FEATURES_PER_FIELD = (
    "sum_tf",
    "sum_tf_norm",
    "sum_tfidf",
    "log_len",
    "bm25",
    "lm_jm",
    "lm_dir",
    "lm_abs",
)
FEATURE_NAMES = tuple(f"{f}_{name}" for f in FIELDS for name in FEATURES_PER_FIELD)

BM25_K1 = 1.2
BM25_B = 0.75
LOG_FLOOR = 1e-12

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace, punctuation and underscores."""
    return _TOKEN.findall(text.lower()) if text else []


@dataclass(frozen=True)
class SmoothingSpec:
    """Language-model smoothing: ``jelinek_mercer`` (lambda), ``dirichlet`` (mu)
    or ``absolute_discount`` (delta)."""

    kind: str
    parameter: float

    def __post_init__(self):
        p = self.parameter
        if self.kind == "jelinek_mercer":
            # lambda == 1 is admitted so the pure-ML boundary can be exercised
            ok = 0.0 < p <= 1.0
        elif self.kind == "dirichlet":
            ok = p > 0.0
        elif self.kind == "absolute_discount":
            ok = 0.0 < p < 1.0
        else:
            raise ValueError(f"unknown smoothing kind {self.kind!r}")
        if not ok or not math.isfinite(p):
            raise ValueError(f"invalid {self.kind} parameter {p!r}")


JM = SmoothingSpec("jelinek_mercer", 0.1)
DIRICHLET = SmoothingSpec("dirichlet", 2000.0)
ABS_DISCOUNT = SmoothingSpec("absolute_discount", 0.7)


class _FieldStats:
    __slots__ = ("tf", "length", "postings", "df", "coll", "total", "avg_len")

    def __init__(self):
        self.tf: list[Counter] = []
        self.length: list[int] = []
        self.postings: dict[str, list[tuple[int, int]]] = {}
        self.df: dict[str, int] = {}
        self.coll: Counter = Counter()
        self.total = 0
        self.avg_len = 0.0

    def add(self, idx, tokens):
        counts = Counter(tokens)
        self.tf.append(counts)
        self.length.append(len(tokens))
        for term, c in counts.items():
            self.postings.setdefault(term, []).append((idx, c))
            self.df[term] = self.df.get(term, 0) + 1
        self.coll.update(counts)
        self.total += len(tokens)


class InvertedIndex:
    """Per-field postings and collection statistics. Immutable after build."""

    def __init__(self, docs):
        docs = list(docs)
        if not docs:
            raise ValueError("cannot index an empty document list")
        self.doc_ids: list[str] = []
        self._pos: dict[str, int] = {}
        self.fields = {f: _FieldStats() for f in FIELDS}
        for i, doc in enumerate(docs):
            if doc.doc_id in self._pos:
                raise ValueError(f"duplicate doc_id {doc.doc_id!r}")
            self._pos[doc.doc_id] = i
            self.doc_ids.append(doc.doc_id)
            title = tokenize(doc.title)
            abstract = tokenize(doc.abstract)
            self.fields["title"].add(i, title)
            self.fields["abstract"].add(i, abstract)
            self.fields["combined"].add(i, title + abstract)
        for st in self.fields.values():
            st.avg_len = st.total / len(docs)

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)

    def __contains__(self, doc_id):
        return doc_id in self._pos

    def position(self, doc_id) -> int:
        try:
            return self._pos[doc_id]
        except KeyError:
            raise KeyError(f"unknown doc_id {doc_id!r}") from None

    def tf(self, term, doc_id, field="combined") -> int:
        return self.fields[field].tf[self.position(doc_id)].get(term, 0)

    def doc_len(self, doc_id, field="combined") -> int:
        return self.fields[field].length[self.position(doc_id)]

    def idf(self, term, field="combined") -> float:
        n = self.n_docs
        df = self.fields[field].df.get(term, 0)
        return math.log(1.0 + (n - df + 0.5) / (df + 0.5))

    def coll_prob(self, term, field="combined") -> float:
        st = self.fields[field]
        return st.coll.get(term, 0) / st.total if st.total else 0.0


def build_index(docs) -> InvertedIndex:
    return InvertedIndex(docs)


def _bm25_term(idf, tf, dl, avg_len, k1, b):
    norm = dl / avg_len if avg_len > 0 else 1.0
    return idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * norm))


def bm25_score(terms, doc_id, field, index: InvertedIndex, k1=BM25_K1, b=BM25_B) -> float:
    if k1 < 0 or not 0.0 <= b <= 1.0:
        raise ValueError("require k1 >= 0 and 0 <= b <= 1")
    st = index.fields[field]
    i = index.position(doc_id)
    counts, dl = st.tf[i], st.length[i]
    score = 0.0
    for t in terms:
        tf = counts.get(t, 0)
        if tf:
            score += _bm25_term(index.idf(t, field), tf, dl, st.avg_len, k1, b)
    return score


def _lm_prob(spec: SmoothingSpec, tf, dl, n_unique, p_coll):
    if spec.kind == "jelinek_mercer":
        p_ml = tf / dl if dl else 0.0
        return spec.parameter * p_ml + (1.0 - spec.parameter) * p_coll
    if spec.kind == "dirichlet":
        return (tf + spec.parameter * p_coll) / (dl + spec.parameter)
    if not dl:
        return p_coll
    delta = spec.parameter
    return max(tf - delta, 0.0) / dl + delta * n_unique / dl * p_coll


def lm_score(terms, doc_id, field, index: InvertedIndex, smoothing: SmoothingSpec) -> float:
    """Query log-likelihood; terms unseen in the collection field are skipped."""
    st = index.fields[field]
    i = index.position(doc_id)
    counts, dl = st.tf[i], st.length[i]
    score = 0.0
    for t in terms:
        p_coll = st.coll.get(t, 0) / st.total if st.total else 0.0
        if p_coll == 0.0:
            continue
        p = _lm_prob(smoothing, counts.get(t, 0), dl, len(counts), p_coll)
        score += math.log(max(p, LOG_FLOOR))
    return score


def _field_features(terms, i, st: _FieldStats, n_docs):
    counts, dl = st.tf[i], st.length[i]
    sum_tf = sum_tfidf = bm25 = jm = dirichlet = absd = 0.0
    n_unique = len(counts)
    for t in terms:
        tf = counts.get(t, 0)
        df = st.df.get(t, 0)
        idf = math.log(1.0 + (n_docs - df + 0.5) / (df + 0.5))
        if tf:
            sum_tf += tf
            sum_tfidf += tf * idf
            bm25 += _bm25_term(idf, tf, dl, st.avg_len, BM25_K1, BM25_B)
        p_coll = st.coll.get(t, 0) / st.total if st.total else 0.0
        if p_coll > 0.0:
            jm += math.log(max(_lm_prob(JM, tf, dl, n_unique, p_coll), LOG_FLOOR))
            dirichlet += math.log(max(_lm_prob(DIRICHLET, tf, dl, n_unique, p_coll), LOG_FLOOR))
            absd += math.log(max(_lm_prob(ABS_DISCOUNT, tf, dl, n_unique, p_coll), LOG_FLOOR))
    return [
        sum_tf,
        sum_tf / dl if dl else 0.0,
        sum_tfidf,
        math.log(dl + 1.0),
        bm25,
        jm,
        dirichlet,
        absd,
    ]


def extract_features(query, doc_id, index: InvertedIndex) -> list[float]:
    """24 match features for one (query, document) pair.

    ``query`` is raw text or an already tokenized list of terms.
    """
    terms = tokenize(query) if isinstance(query, str) else list(query)
    i = index.position(doc_id)
    out = []
    for f in FIELDS:
        out.extend(_field_features(terms, i, index.fields[f], index.n_docs))
    return out


def retrieve_topk(query, index: InvertedIndex, k: int, field="combined") -> list[tuple[str, float]]:
    """Top-``k`` documents by BM25, ties by doc_id ascending.

    Documents that match no query term score 0 and are never returned.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    terms = tokenize(query) if isinstance(query, str) else list(query)
    st = index.fields[field]
    acc: dict[int, float] = {}
    for t in terms:
        postings = st.postings.get(t)
        if not postings:
            continue
        idf = index.idf(t, field)
        for i, tf in postings:
            acc[i] = acc.get(i, 0.0) + _bm25_term(idf, tf, st.length[i], st.avg_len, BM25_K1, BM25_B)
    ranked = sorted(((index.doc_ids[i], s) for i, s in acc.items() if s > 0.0), key=lambda x: (-x[1], x[0]))
    return ranked[:k]


class HeuristicFeatures(TransformerMixin, BaseEstimator):
    """Transformer mapping ``(query, doc_id)`` pairs to the 24 match features.

    ``fit`` indexes a document collection; ``transform`` takes an iterable of
    ``(query_text_or_terms, doc_id)`` pairs and returns an ``(n, 24)`` array.
    """

    def fit(self, docs, y=None):
        self.index_ = build_index(docs)
        self.n_features_out_ = len(FEATURE_NAMES)
        return self

    def transform(self, pairs):
        check_is_fitted(self, "index_")
        rows = [extract_features(q, d, self.index_) for q, d in pairs]
        return np.asarray(rows, dtype=float).reshape(-1, len(FEATURE_NAMES))

    def get_feature_names_out(self, input_features=None):
        return np.asarray(FEATURE_NAMES, dtype=object)
