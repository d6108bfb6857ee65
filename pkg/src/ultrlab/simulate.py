"""Synthetic corpus with graded relevance and position-biased click simulation.

Queries belong to topics. Each query owns a first result page of ten
documents whose text mixes query terms (more for higher grades), topic terms
and background terms. Remaining documents are off-list topic documents that
match queries only partially; they are the natural BM25 hard negatives.

Clicks follow the position-based model: an item at rank ``k`` is examined
with probability ``(1/k)**eta`` and clicked if examined and perceived
relevant.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from ._utils import derived_rng, split_by_qid
from .corpus_io import LIST_LEN, ClickLog, Document, Query

DEFAULT_PRIOR = (0.10, 0.15, 0.25, 0.25, 0.25)

_SYLLABLES = (
    "ba be bi bo bu da de di do du fa fe fi fo fu ga ge gi go gu ka ke ki ko ku "
    "la le li lo lu ma me mi mo mu na ne ni no nu pa pe pi po pu ra re ri ro ru "
    "sa se si so su ta te ti to tu va ve vi vo vu za ze zi zo zu"
).split()


@dataclass(frozen=True)
class SimSpec:
    n_queries: int = 200
    n_docs: int = 4000
    vocab_size: int = 5000
    max_grade: int = 4
    eta: float = 1.0
    click_noise: float = 0.3
    list_len: int = LIST_LEN
    seed: int = 0
    grade_prior: tuple = DEFAULT_PRIOR
    n_topics: int = 0
    ranker_noise: float = 3.0
    length_bias: float = 0.0
    match_strength: float = 0.5
    min_false_negatives: int = 0
    split_fractions: tuple = (0.6, 0.2, 0.2)

    def __post_init__(self):
        object.__setattr__(self, "grade_prior", tuple(float(p) for p in self.grade_prior))
        object.__setattr__(self, "split_fractions", tuple(float(p) for p in self.split_fractions))
        for name in ("n_queries", "n_docs", "vocab_size"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.list_len != LIST_LEN:
            raise ValueError(f"list_len must be {LIST_LEN}")
        if self.max_grade < 1:
            raise ValueError("max_grade must be >= 1")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if not 0.0 <= self.click_noise < 1.0:
            raise ValueError("click_noise must lie in [0, 1)")
        if len(self.grade_prior) != self.max_grade + 1:
            raise ValueError("grade_prior needs max_grade + 1 entries")
        if min(self.grade_prior) < 0 or not np.isclose(sum(self.grade_prior), 1.0):
            raise ValueError("grade_prior must be a probability vector")
        if self.n_docs < self.list_len * self.n_queries:
            raise ValueError("n_docs must be >= 10 * n_queries (every query owns a result page)")
        if self.vocab_size < 20:
            raise ValueError("vocab_size must be >= 20")
        if not 0 <= self.min_false_negatives < self.list_len:
            raise ValueError("min_false_negatives must lie in [0, 10)")
        if self.min_false_negatives and self.max_grade < 2:
            raise ValueError("false-negative stress mode needs max_grade >= 2")
        if not 0.0 <= self.match_strength <= 1.5:
            raise ValueError("match_strength must lie in [0, 1.5]")
        if self.ranker_noise < 0:
            raise ValueError("ranker_noise must be >= 0")

    @property
    def topics(self) -> int:
        return self.n_topics if self.n_topics > 0 else max(1, self.n_queries // 8)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d) -> "SimSpec":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown SimSpec fields: {sorted(unknown)}")
        return cls(**d)


class SimCorpus(NamedTuple):
    queries: list
    docs: list
    truth: dict
    lists: dict
    splits: dict


def _vocabulary(n, rng):
    words, seen = [], set()
    n_syl = 2
    while len(words) < n:
        w = "".join(rng.choice(_SYLLABLES, size=n_syl))
        if w not in seen:
            seen.add(w)
            words.append(w)
        elif len(seen) > 0.5 * len(_SYLLABLES) ** n_syl:
            n_syl += 1
    return words


def _zipf_cdf(n, s=1.0):
    p = 1.0 / np.arange(1, n + 1) ** s
    cdf = np.cumsum(p / p.sum())
    cdf[-1] = 1.0
    return cdf


# share of tokens drawn from the query terms, per grade (title, abstract)
def _match_rates(grade, max_grade, strength=1.0):
    g = strength * grade / max_grade
    return 0.02 + 0.60 * g, 0.01 + 0.35 * g


_TOPIC_RATE = 0.25


def _render(rng, n_tokens, q_terms, q_rate, topic_terms, vocab, bg_cdf):
    kind = rng.random(n_tokens)
    pick = rng.random(n_tokens)
    toks = []
    for u, v in zip(kind, pick):
        if q_terms and u < q_rate:
            toks.append(q_terms[int(v * len(q_terms))])
        elif u < q_rate + _TOPIC_RATE:
            toks.append(topic_terms[int(v * len(topic_terms))])
        else:
            toks.append(vocab[int(np.searchsorted(bg_cdf, v, side="right"))])
    return " ".join(toks)


def generate_corpus(spec: SimSpec) -> SimCorpus:
    """Deterministic synthetic corpus for ``spec``.

    Each query's initial list is ordered by a noisy production ranker,
    ``grade + N(0, ranker_noise**2) + length_bias * z(log length)``, so most
    of the first page is relevant while positions still mix grades.
    """
    rng = np.random.default_rng(spec.seed)
    vocab = _vocabulary(spec.vocab_size, rng)
    bg_cdf = _zipf_cdf(len(vocab))
    n_topic_terms = max(8, min(40, spec.vocab_size // (2 * spec.topics)))
    topic_terms = [list(rng.choice(vocab, size=n_topic_terms, replace=False)) for _ in range(spec.topics)]
    prior = np.asarray(spec.grade_prior)
    width = len(str(max(spec.n_queries, spec.n_docs) - 1))

    queries, docs, truth, lists = [], [], {}, {}
    doc_counter = 0

    def next_doc_id():
        nonlocal doc_counter
        doc_id = f"d{doc_counter:0{width}d}"
        doc_counter += 1
        return doc_id

    query_topic = []
    for qi in range(spec.n_queries):
        qid = f"q{qi:0{width}d}"
        t = int(rng.integers(spec.topics))
        query_topic.append(t)
        n_terms = int(rng.integers(2, 5))
        q_terms = list(rng.choice(topic_terms[t], size=min(n_terms, n_topic_terms), replace=False))
        queries.append(Query(qid, " ".join(q_terms)))

        grades = rng.choice(len(prior), size=spec.list_len, p=prior)
        if spec.min_false_negatives:
            need = spec.min_false_negatives + 1
            low = np.flatnonzero(grades < 2)
            short = need - int(np.sum(grades >= 2))
            if short > 0:
                up = rng.choice(low, size=short, replace=False)
                grades[up] = rng.integers(2, spec.max_grade + 1, size=short)

        page = []
        for g in grades:
            doc_id = next_doc_id()
            t_rate, a_rate = _match_rates(int(g), spec.max_grade, spec.match_strength)
            title = _render(rng, int(rng.integers(4, 11)), q_terms, t_rate, topic_terms[t], vocab, bg_cdf)
            abstract = _render(rng, int(rng.integers(30, 81)), q_terms, a_rate, topic_terms[t], vocab, bg_cdf)
            docs.append(Document(doc_id, title, abstract))
            page.append((doc_id, int(g), len(title.split()) + len(abstract.split())))

        lengths = np.log([p[2] for p in page])
        z = (lengths - lengths.mean()) / (lengths.std() + 1e-9)
        prod = (
            np.array([p[1] for p in page], dtype=float)
            + spec.ranker_noise * rng.standard_normal(spec.list_len)
            + spec.length_bias * z
        )
        order = np.argsort(-prod, kind="stable")
        lists[qid] = [page[i][0] for i in order]
        for i in order:
            truth[(qid, page[i][0])] = page[i][1]

    # off-list documents: topical but lacking any query's full term set
    while doc_counter < spec.n_docs:
        t = int(rng.integers(spec.topics))
        doc_id = next_doc_id()
        title = _render(rng, int(rng.integers(4, 11)), [], 0.0, topic_terms[t], vocab, bg_cdf)
        abstract = _render(rng, int(rng.integers(15, 61)), [], 0.0, topic_terms[t], vocab, bg_cdf)
        docs.append(Document(doc_id, title, abstract))

    splits = split_by_qid([q.qid for q in queries], spec.split_fractions, ("train", "valid", "test"), spec.seed)
    return SimCorpus(queries, docs, truth, lists, splits)


def examination_prob(position, eta: float):
    """``(1/k)**eta`` for 1-based position ``k``."""
    return (1.0 / np.asarray(position, dtype=float)) ** eta


def perceived_relevance(grade, max_grade: int, click_noise: float):
    g = np.asarray(grade, dtype=float)
    return click_noise + (1.0 - click_noise) * (2.0**g - 1.0) / (2.0**max_grade - 1.0)


def click_probabilities(grades, eta, click_noise, max_grade=4):
    grades = np.asarray(grades, dtype=float)
    pos = np.arange(1, len(grades) + 1)
    return examination_prob(pos, eta) * perceived_relevance(grades, max_grade, click_noise)


def _suppress_clicks(clicks, grades, m):
    """Unclick relevant items after the first click, bottom-up, until at least
    ``m`` items with grade >= 2 are unclicked."""
    relevant = grades >= 2
    missing = m - int(np.sum(relevant & (clicks == 0)))
    if missing <= 0:
        return clicks
    clicked = np.flatnonzero(clicks)
    if clicked.size == 0:
        return clicks
    first = clicked[0]
    for i in range(len(clicks) - 1, first, -1):
        if missing <= 0:
            break
        if clicks[i] and relevant[i]:
            clicks[i] = 0
            missing -= 1
    return clicks


def simulate_clicks(lists, truth, eta=1.0, click_noise=0.1, seed=0, max_grade=4, min_false_negatives=0):
    """Sample one click log per query.

    ``lists`` maps qid to its ten ranked doc ids. Randomness for each query
    comes from the substream ``(seed, qid)``.
    """
    logs = []
    for qid, docs in lists.items():
        if len(docs) != LIST_LEN:
            raise ValueError(f"query {qid!r}: list must have {LIST_LEN} docs")
        try:
            grades = np.array([truth[(qid, d)] for d in docs])
        except KeyError as exc:
            raise KeyError(f"missing grade for {exc.args[0]!r}") from None
        if np.any(grades < 0) or np.any(grades > max_grade):
            raise ValueError(f"query {qid!r}: grade outside [0, {max_grade}]")
        probs = click_probabilities(grades, eta, click_noise, max_grade)
        rng = derived_rng(seed, qid)
        clicks = (rng.random(LIST_LEN) < probs).astype(int)
        if min_false_negatives:
            clicks = _suppress_clicks(clicks, grades, min_false_negatives)
        logs.append(ClickLog(qid, list(docs), [int(c) for c in clicks]))
    return logs


def simulate(spec: SimSpec):
    """Corpus plus click logs for every query."""
    corpus = generate_corpus(spec)
    logs = simulate_clicks(
        corpus.lists,
        corpus.truth,
        eta=spec.eta,
        click_noise=spec.click_noise,
        seed=spec.seed,
        max_grade=spec.max_grade,
        min_false_negatives=spec.min_false_negatives,
    )
    return corpus, logs
