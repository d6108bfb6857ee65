"""DCG@k / nDCG@k with exponential gain ``2**g - 1`` and ``log2(i + 1)`` discount."""

from __future__ import annotations

import numpy as np


def _discounts(n):
    return 1.0 / np.log2(np.arange(2, n + 2, dtype=float))


def dcg_at_k(grades, k: int = 10) -> float:
    """DCG of ``grades`` taken in ranked order, truncated at ``k``."""
    if k < 1:
        raise ValueError("k must be >= 1")
    g = np.asarray(grades, dtype=float)[:k]
    if g.size == 0:
        return 0.0
    return float(np.sum((np.power(2.0, g) - 1.0) * _discounts(g.size)))


def ideal_dcg_at_k(ideal_grades, k: int = 10) -> float:
    return dcg_at_k(np.sort(np.asarray(ideal_grades, dtype=float))[::-1], k)


def ndcg_at_k(grades, ideal_grades=None, k: int = 10) -> float:
    """nDCG of a ranked grade list against the query's judged grades.

    ``ideal_grades`` defaults to ``grades`` (re-ranking a fixed list). A query
    whose ideal DCG is zero scores 0.
    """
    if ideal_grades is None:
        ideal_grades = grades
    ideal = ideal_dcg_at_k(ideal_grades, k)
    if ideal <= 0.0:
        return 0.0
    return dcg_at_k(grades, k) / ideal


def rank_order(scores) -> np.ndarray:
    """Indices sorting ``scores`` descending; ties keep input order."""
    return np.argsort(-np.asarray(scores, dtype=float), kind="stable")


def ndcg_of_scores(scores, grades, k: int = 10) -> float:
    grades = np.asarray(grades, dtype=float)
    return ndcg_at_k(grades[rank_order(scores)], grades, k)


def mean_ndcg(score_lists, grade_lists, k: int = 10, mask=None) -> float:
    """Mean nDCG@k over queries.

    Accepts 2-D arrays ``(n_queries, list_len)`` or ragged sequences. ``mask``
    marks valid entries when lists are padded.
    """
    vals = []
    for i, (s, g) in enumerate(zip(score_lists, grade_lists)):
        s = np.asarray(s, dtype=float)
        g = np.asarray(g, dtype=float)
        if mask is not None:
            m = np.asarray(mask[i], dtype=bool)
            s, g = s[m], g[m]
        vals.append(ndcg_of_scores(s, g, k))
    return float(np.mean(vals)) if vals else 0.0


def evaluate_run(run, truth, k: int = 10):
    """Score a run (``qid -> {doc_id: score}``) against ``(qid, doc_id) -> grade``.

    Returns ``(summary, per_query)``. Unjudged documents count as grade 0; the
    ideal ranking uses every judged document of the query. Run order follows
    the ``write_run_file`` convention (descending score, ties by doc_id).
    """
    judged: dict[str, list[int]] = {}
    for (q, _), g in truth.items():
        judged.setdefault(q, []).append(g)
    per_query = []
    for qid, scores in run.items():
        ranked = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))
        grades = [truth.get((qid, d), 0) for d, _ in ranked]
        ideal = judged.get(qid, [])
        per_query.append(
            {
                "qid": qid,
                f"ndcg@{k}": ndcg_at_k(grades, ideal, k),
                f"dcg@{k}": dcg_at_k(grades, k),
            }
        )
    n = len(per_query)
    summary = {
        "n_queries": n,
        f"ndcg@{k}": float(np.mean([r[f"ndcg@{k}"] for r in per_query])) if n else 0.0,
        f"dcg@{k}": float(np.mean([r[f"dcg@{k}"] for r in per_query])) if n else 0.0,
    }
    return summary, per_query
