"""Data model and on-disk formats for corpora, click logs, features and runs.

Formats
-------
* documents: JSON lines ``{"doc_id", "title", "abstract"}``
* queries: JSON lines ``{"qid", "text"}``
* clicks: JSON lines ``{"qid", "docs": [10 ids], "clicks": [10 flags]}``
* labeled lists: JSON lines ``{"qid", "doc_ids", "labels", "propensity_eligible"}``
* features: LETOR lines ``<label> qid:<qid> 1:<v> ... 24:<v> # <doc_id>``
* truth: qrels lines ``<qid> 0 <doc_id> <grade>``
* runs: TREC lines ``<qid> Q0 <doc_id> <rank> <score> <tag>``
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

LIST_LEN = 10
N_FEATURES = 24


class FormatError(ValueError):
    """Raised when a record violates its file format or type invariants."""

    def __init__(self, message, line=None, column=None, path=None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str = ""
    abstract: str = ""

    def __post_init__(self):
        if not self.doc_id:
            raise FormatError("empty doc_id")


@dataclass(frozen=True)
class Query:
    qid: str
    text: str = ""

    def __post_init__(self):
        if not self.qid:
            raise FormatError("empty qid")


@dataclass(frozen=True)
class ClickLog:
    qid: str
    ranked_docs: tuple
    clicks: tuple

    def __post_init__(self):
        if not self.qid:
            raise FormatError("empty qid")
        object.__setattr__(self, "ranked_docs", tuple(self.ranked_docs))
        object.__setattr__(self, "clicks", tuple(self.clicks))
        if len(self.ranked_docs) != LIST_LEN:
            raise FormatError(f"expected {LIST_LEN} docs, got {len(self.ranked_docs)}")
        if len(self.clicks) != LIST_LEN:
            raise FormatError(f"expected {LIST_LEN} clicks, got {len(self.clicks)}")
        for c in self.clicks:
            # bool is an int subclass; reject it along with floats like 1.0
            if type(c) is not int or c not in (0, 1):
                raise FormatError(f"click flag must be 0 or 1, got {c!r}")
        if any(not d for d in self.ranked_docs):
            raise FormatError("empty doc_id in ranked list")


@dataclass(frozen=True)
class LabeledList:
    qid: str
    doc_ids: tuple
    labels: tuple
    propensity_eligible: tuple

    def __post_init__(self):
        object.__setattr__(self, "doc_ids", tuple(self.doc_ids))
        object.__setattr__(self, "labels", tuple(float(v) for v in self.labels))
        object.__setattr__(self, "propensity_eligible", tuple(int(v) for v in self.propensity_eligible))
        n = len(self.doc_ids)
        if len(self.labels) != n or len(self.propensity_eligible) != n:
            raise FormatError("doc_ids, labels and propensity_eligible differ in length")
        if not all(math.isfinite(v) for v in self.labels):
            raise FormatError("non-finite label")
        if any(v not in (0, 1) for v in self.propensity_eligible):
            raise FormatError("propensity_eligible flags must be 0 or 1")


@dataclass(frozen=True)
class FeatureRow:
    label: int
    qid: str
    features: tuple
    doc_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(float(v) for v in self.features))
        if self.label < 0:
            raise FormatError("invalid label")
        if len(self.features) != N_FEATURES:
            raise FormatError(f"expected {N_FEATURES} features, got {len(self.features)}")
        if not all(math.isfinite(v) for v in self.features):
            raise FormatError("non-finite feature value")


# --------------------------------------------------------------------------
# atomic writes


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` via a temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_lines(path, lines):
    atomic_write_text(path, "".join(line + "\n" for line in lines))


def _json_line(obj):
    return json.dumps(obj, ensure_ascii=False, separators=(", ", ": "))


def _read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                yield lineno, json.loads(raw)
            except json.JSONDecodeError as exc:
                raise FormatError(f"invalid JSON: {exc.msg}", line=lineno, column=exc.colno, path=path) from None


def _require(rec, key, lineno, path):
    if not isinstance(rec, dict) or key not in rec:
        raise FormatError(f"missing field {key!r}", line=lineno, path=path)
    return rec[key]


# --------------------------------------------------------------------------
# documents and queries


def document_to_json(doc: Document) -> str:
    return _json_line({"doc_id": doc.doc_id, "title": doc.title, "abstract": doc.abstract})


def document_from_json(line: str) -> Document:
    rec = json.loads(line)
    return Document(str(rec["doc_id"]), rec.get("title", ""), rec.get("abstract", ""))


def query_to_json(query: Query) -> str:
    return _json_line({"qid": query.qid, "text": query.text})


def query_from_json(line: str) -> Query:
    rec = json.loads(line)
    return Query(str(rec["qid"]), rec.get("text", ""))


def write_documents(docs: Iterable[Document], path) -> None:
    _write_lines(path, (document_to_json(d) for d in docs))


def load_documents(path) -> list[Document]:
    docs, seen = [], set()
    for lineno, rec in _read_jsonl(path):
        doc_id = str(_require(rec, "doc_id", lineno, path))
        if doc_id in seen:
            raise FormatError(f"duplicate doc_id {doc_id!r}", line=lineno, path=path)
        seen.add(doc_id)
        try:
            docs.append(Document(doc_id, rec.get("title", ""), rec.get("abstract", "")))
        except FormatError as exc:
            raise FormatError(str(exc), line=lineno, path=path) from None
    return docs


def write_queries(queries: Iterable[Query], path) -> None:
    _write_lines(path, (query_to_json(q) for q in queries))


def load_queries(path) -> list[Query]:
    queries, seen = [], set()
    for lineno, rec in _read_jsonl(path):
        qid = str(_require(rec, "qid", lineno, path))
        if qid in seen:
            raise FormatError(f"duplicate qid {qid!r}", line=lineno, path=path)
        seen.add(qid)
        try:
            queries.append(Query(qid, rec.get("text", "")))
        except FormatError as exc:
            raise FormatError(str(exc), line=lineno, path=path) from None
    return queries


# --------------------------------------------------------------------------
# click logs


def click_log_to_json(log: ClickLog) -> str:
    return _json_line({"qid": log.qid, "docs": list(log.ranked_docs), "clicks": list(log.clicks)})


def click_log_from_json(line: str) -> ClickLog:
    rec = json.loads(line)
    return ClickLog(str(rec["qid"]), rec["docs"], rec["clicks"])


def write_click_log(logs: Iterable[ClickLog], path) -> None:
    _write_lines(path, (click_log_to_json(log) for log in logs))


def load_click_log(path) -> list[ClickLog]:
    """Load and validate a click log; order is preserved."""
    logs, seen = [], set()
    for lineno, rec in _read_jsonl(path):
        qid = str(_require(rec, "qid", lineno, path))
        docs = _require(rec, "docs", lineno, path)
        clicks = _require(rec, "clicks", lineno, path)
        if qid in seen:
            raise FormatError(f"duplicate qid {qid!r}", line=lineno, path=path)
        seen.add(qid)
        if not isinstance(docs, list) or not isinstance(clicks, list):
            raise FormatError("docs and clicks must be lists", line=lineno, path=path)
        try:
            logs.append(ClickLog(qid, [str(d) for d in docs], clicks))
        except FormatError as exc:
            raise FormatError(str(exc), line=lineno, path=path) from None
    return logs


# --------------------------------------------------------------------------
# labeled lists (label-corrected click data)


def labeled_list_to_json(item: LabeledList) -> str:
    return _json_line(
        {
            "qid": item.qid,
            "doc_ids": list(item.doc_ids),
            "labels": list(item.labels),
            "propensity_eligible": list(item.propensity_eligible),
        }
    )


def write_labeled_lists(items: Iterable[LabeledList], path) -> None:
    _write_lines(path, (labeled_list_to_json(x) for x in items))


def load_labeled_lists(path) -> list[LabeledList]:
    out = []
    for lineno, rec in _read_jsonl(path):
        try:
            out.append(
                LabeledList(
                    str(_require(rec, "qid", lineno, path)),
                    [str(d) for d in _require(rec, "doc_ids", lineno, path)],
                    _require(rec, "labels", lineno, path),
                    _require(rec, "propensity_eligible", lineno, path),
                )
            )
        except (FormatError, TypeError) as exc:
            raise FormatError(str(exc), line=lineno, path=path) from None
    return out


# --------------------------------------------------------------------------
# LETOR feature rows


def parse_letor_line(line: str, lineno: int | None = None) -> FeatureRow:
    """Parse ``<label> qid:<qid> 1:<v> ... 24:<v> # <doc_id>``.

    Columns in error messages are 1-based character offsets into ``line``.
    """
    body, _, comment = line.rstrip("\n").partition("#")
    doc_id = comment.strip()
    tokens = []
    pos = 0
    for tok in body.split():
        pos = body.index(tok, pos)
        tokens.append((pos + 1, tok))
        pos += len(tok)
    if not tokens:
        raise FormatError("empty line", line=lineno, column=1)

    col, tok = tokens[0]
    try:
        label = int(tok)
    except ValueError:
        raise FormatError("invalid label", line=lineno, column=col) from None
    if label < 0:
        raise FormatError("invalid label", line=lineno, column=col)

    if len(tokens) < 2 or not tokens[1][1].startswith("qid:") or len(tokens[1][1]) == 4:
        column = tokens[1][0] if len(tokens) > 1 else len(body) + 1
        raise FormatError("missing qid", line=lineno, column=column)
    qid = tokens[1][1][4:]

    values = []
    for expected, (col, tok) in enumerate(tokens[2:], 1):
        idx, sep, raw = tok.partition(":")
        if not sep:
            raise FormatError(f"malformed feature {tok!r}", line=lineno, column=col)
        try:
            index = int(idx)
        except ValueError:
            raise FormatError(f"malformed feature index {idx!r}", line=lineno, column=col) from None
        if index != expected:
            raise FormatError(f"missing index {expected}, got {index}", line=lineno, column=col)
        try:
            value = float(raw)
        except ValueError:
            raise FormatError(f"malformed feature value {raw!r}", line=lineno, column=col) from None
        if not math.isfinite(value):
            raise FormatError(f"non-finite value at index {index}", line=lineno, column=col)
        values.append(value)
    if len(values) != N_FEATURES:
        raise FormatError(f"expected {N_FEATURES} features, got {len(values)}", line=lineno, column=len(body) + 1)
    return FeatureRow(label, qid, tuple(values), doc_id)


def format_letor_line(row: FeatureRow) -> str:
    feats = " ".join(f"{i}:{v!r}" for i, v in enumerate(row.features, 1))
    line = f"{row.label} qid:{row.qid} {feats}"
    return f"{line} # {row.doc_id}" if row.doc_id else line


def write_letor(rows: Iterable[FeatureRow], path) -> None:
    _write_lines(path, (format_letor_line(r) for r in rows))


def load_letor(path) -> list[FeatureRow]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            if not raw.strip():
                continue
            try:
                rows.append(parse_letor_line(raw, lineno))
            except FormatError as exc:
                raise FormatError(str(exc), path=path) from None
    return rows


# --------------------------------------------------------------------------
# truth (qrels) and pairs


def write_truth(truth: Mapping, path) -> None:
    """``truth`` maps ``(qid, doc_id) -> grade``; written in insertion order."""
    _write_lines(path, (f"{q} 0 {d} {int(g)}" for (q, d), g in truth.items()))


def load_truth(path) -> dict:
    truth = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            parts = raw.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise FormatError("expected '<qid> 0 <doc_id> <grade>'", line=lineno, path=path)
            try:
                grade = int(parts[3])
            except ValueError:
                raise FormatError("invalid grade", line=lineno, path=path) from None
            if grade < 0:
                raise FormatError("invalid grade", line=lineno, path=path)
            truth[(parts[0], parts[2])] = grade
    return truth


def load_pairs(path) -> list[tuple[str, str, int]]:
    """Lines ``<qid> <doc_id> [label]``; label defaults to 0."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            parts = raw.split()
            if not parts:
                continue
            if len(parts) not in (2, 3):
                raise FormatError("expected '<qid> <doc_id> [label]'", line=lineno, path=path)
            label = 0
            if len(parts) == 3:
                try:
                    label = int(parts[2])
                except ValueError:
                    raise FormatError("invalid label", line=lineno, path=path) from None
            pairs.append((parts[0], parts[1], label))
    return pairs


def write_pairs(pairs: Iterable[tuple], path) -> None:
    _write_lines(path, (" ".join(str(x) for x in p) for p in pairs))


# --------------------------------------------------------------------------
# run files


@dataclass
class RunEntry:
    qid: str
    doc_id: str
    rank: int
    score: float
    tag: str = field(default="ultrlab")


def rank_scored(scores: Mapping[str, float]) -> list[tuple[str, float]]:
    """Order ``doc_id -> score`` by descending score, ties by doc_id ascending."""
    for d, s in scores.items():
        if not math.isfinite(s):
            raise ValueError(f"non-finite score for {d!r}")
    return sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))


def write_run_file(rankings: Mapping[str, Mapping[str, float]], path, tag: str = "ultrlab") -> None:
    """Write a TREC run file; queries in insertion order."""
    lines = []
    for qid, scores in rankings.items():
        for rank, (doc_id, score) in enumerate(rank_scored(scores), 1):
            lines.append(f"{qid} Q0 {doc_id} {rank} {float(score)!r} {tag}")
    _write_lines(path, lines)


def load_run_file(path) -> dict[str, dict[str, float]]:
    runs: dict[str, dict[str, float]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            parts = raw.split()
            if not parts:
                continue
            if len(parts) != 6:
                raise FormatError("expected '<qid> Q0 <doc_id> <rank> <score> <tag>'", line=lineno, path=path)
            try:
                score = float(parts[4])
            except ValueError:
                raise FormatError("invalid score", line=lineno, path=path) from None
            runs.setdefault(parts[0], {})[parts[2]] = score
    return runs


# --------------------------------------------------------------------------
# query splits


def write_splits(splits: Mapping[str, str], path) -> None:
    _write_lines(path, (f"{q}\t{s}" for q, s in splits.items()))


def load_splits(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            parts = raw.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise FormatError("expected '<qid>\\t<split>'", line=lineno, path=path)
            out[parts[0]] = parts[1]
    return out
