import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ultrlab.corpus_io import (
    ClickLog,
    Document,
    FeatureRow,
    FormatError,
    LabeledList,
    Query,
    click_log_from_json,
    click_log_to_json,
    document_from_json,
    document_to_json,
    format_letor_line,
    load_click_log,
    load_documents,
    load_labeled_lists,
    load_letor,
    load_pairs,
    load_queries,
    load_run_file,
    load_splits,
    load_truth,
    parse_letor_line,
    query_from_json,
    query_to_json,
    write_click_log,
    write_documents,
    write_labeled_lists,
    write_letor,
    write_queries,
    write_run_file,
    write_splits,
    write_truth,
)

DOCS10 = [f"d{i}" for i in range(10)]


def letor(label="2", qid="7", n=24, doc="d42"):
    feats = " ".join(f"{i}:0.5" for i in range(1, n + 1))
    return f"{label} qid:{qid} {feats} # {doc}"


ident = st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789_-", min_size=1, max_size=8)
text = st.text(max_size=40)
finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


class TestLetor:
    def test_parse_example(self):
        row = parse_letor_line(letor())
        assert (row.label, row.qid, row.doc_id) == (2, "7", "d42")
        assert row.features == (0.5,) * 24

    def test_invalid_label(self):
        with pytest.raises(FormatError, match="invalid label"):
            parse_letor_line(letor(label="x"))

    def test_23_features(self):
        with pytest.raises(FormatError, match="expected 24 features"):
            parse_letor_line(letor(n=23))

    def test_missing_index_names_column(self):
        line = letor().replace(" 5:0.5", " 6:0.5", 1)
        with pytest.raises(FormatError, match="missing index 5") as exc:
            parse_letor_line(line, lineno=3)
        assert exc.value.line == 3
        assert line[exc.value.column - 1 :].startswith("6:0.5")

    @pytest.mark.parametrize("bad", ["nan", "inf", "-inf"])
    def test_non_finite(self, bad):
        with pytest.raises(FormatError, match="non-finite"):
            parse_letor_line(letor().replace("3:0.5", f"3:{bad}"))

    def test_missing_qid(self):
        with pytest.raises(FormatError, match="missing qid"):
            parse_letor_line("1 1:0.5")

    def test_load_reports_path_and_line(self, tmp_path):
        p = tmp_path / "f.letor"
        p.write_text(letor() + "\n" + letor(n=23) + "\n")
        with pytest.raises(FormatError, match="line 2"):
            load_letor(p)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 9), ident, st.lists(finite, min_size=24, max_size=24), ident)
    def test_round_trip(self, label, qid, feats, doc):
        row = FeatureRow(label, qid, tuple(feats), doc)
        assert parse_letor_line(format_letor_line(row)) == row

    def test_file_round_trip(self, tmp_path):
        rows = [FeatureRow(i % 3, f"q{i}", tuple(float(j) * i for j in range(24)), f"d{i}") for i in range(5)]
        write_letor(rows, tmp_path / "x")
        assert load_letor(tmp_path / "x") == rows


class TestClickLog:
    def test_valid_record(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text(json.dumps({"qid": "q", "docs": DOCS10, "clicks": [0, 1] + [0] * 8}) + "\n")
        (log,) = load_click_log(p)
        assert log.clicks[1] == 1 and log.ranked_docs == tuple(DOCS10)

    def test_nine_docs_rejected(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text(json.dumps({"qid": "q", "docs": DOCS10[:9], "clicks": [0] * 9}) + "\n")
        with pytest.raises(FormatError):
            load_click_log(p)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "c.jsonl"
        p.write_text("")
        assert load_click_log(p) == []

    def test_duplicate_qid(self, tmp_path):
        rec = json.dumps({"qid": "q", "docs": DOCS10, "clicks": [0] * 10})
        p = tmp_path / "c.jsonl"
        p.write_text(rec + "\n" + rec + "\n")
        with pytest.raises(FormatError, match="duplicate"):
            load_click_log(p)

    @pytest.mark.parametrize("flag", [2, -1, 1.0, True, "1"])
    def test_bad_flag(self, flag):
        with pytest.raises(FormatError):
            ClickLog("q", DOCS10, [flag] + [0] * 9)

    @settings(max_examples=60, deadline=None)
    @given(ident, st.lists(ident, min_size=10, max_size=10), st.lists(st.integers(0, 1), min_size=10, max_size=10))
    def test_round_trip(self, qid, docs, clicks):
        log = ClickLog(qid, docs, clicks)
        assert click_log_from_json(click_log_to_json(log)) == log

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.integers(0, 1), min_size=10, max_size=10),
        st.sampled_from(["drop_doc", "add_doc", "bad_flag", "empty_qid", "drop_click"]),
        st.integers(0, 9),
    )
    def test_mutated_records_rejected(self, clicks, mutation, pos):
        rec = {"qid": "q", "docs": list(DOCS10), "clicks": list(clicks)}
        if mutation == "drop_doc":
            rec["docs"].pop(pos)
        elif mutation == "add_doc":
            rec["docs"].append("extra")
        elif mutation == "bad_flag":
            rec["clicks"][pos] = 2
        elif mutation == "empty_qid":
            rec["qid"] = ""
        else:
            rec["clicks"].pop(pos)
        with pytest.raises(FormatError):
            click_log_from_json(json.dumps(rec))

    def test_file_order_preserved(self, tmp_path):
        logs = [ClickLog(f"q{i}", DOCS10, [i % 2] * 10) for i in (3, 1, 2)]
        write_click_log(logs, tmp_path / "c")
        assert load_click_log(tmp_path / "c") == logs


class TestDocumentsAndQueries:
    @settings(max_examples=60, deadline=None)
    @given(ident, text, text)
    def test_document_round_trip(self, doc_id, title, abstract):
        d = Document(doc_id, title, abstract)
        assert document_from_json(document_to_json(d)) == d

    @settings(max_examples=60, deadline=None)
    @given(ident, text)
    def test_query_round_trip(self, qid, t):
        q = Query(qid, t)
        assert query_from_json(query_to_json(q)) == q

    def test_empty_ids_rejected(self):
        with pytest.raises(FormatError):
            Document("", "t", "a")
        with pytest.raises(FormatError):
            Query("", "t")

    def test_duplicate_doc_ids(self, tmp_path):
        write_documents([Document("a"), Document("b")], tmp_path / "d")
        assert [d.doc_id for d in load_documents(tmp_path / "d")] == ["a", "b"]
        (tmp_path / "d").write_text((tmp_path / "d").read_text() * 2)
        with pytest.raises(FormatError, match="duplicate"):
            load_documents(tmp_path / "d")

    def test_queries_file(self, tmp_path):
        qs = [Query("q1", "alpha beta"), Query("q2", "")]
        write_queries(qs, tmp_path / "q")
        assert load_queries(tmp_path / "q") == qs


class TestRunFiles:
    def test_descending_scores(self, tmp_path):
        write_run_file({"q": {"dB": 1.0, "dA": 2.0}}, tmp_path / "r")
        lines = (tmp_path / "r").read_text().splitlines()
        assert lines == ["q Q0 dA 1 2.0 ultrlab", "q Q0 dB 2 1.0 ultrlab"]

    def test_ties_by_doc_id(self, tmp_path):
        write_run_file({"q": {"dB": 1.0, "dA": 1.0}}, tmp_path / "r")
        assert [ln.split()[2] for ln in (tmp_path / "r").read_text().splitlines()] == ["dA", "dB"]

    def test_empty(self, tmp_path):
        write_run_file({}, tmp_path / "r")
        assert (tmp_path / "r").read_text() == ""

    def test_non_finite_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_run_file({"q": {"d": math.nan}}, tmp_path / "r")

    def test_round_trip(self, tmp_path):
        run = {"q1": {"a": 0.25, "b": -1.5}, "q2": {"c": 3.0}}
        write_run_file(run, tmp_path / "r")
        assert load_run_file(tmp_path / "r") == run


class TestOtherFiles:
    def test_truth(self, tmp_path):
        truth = {("q1", "a"): 3, ("q1", "b"): 0}
        write_truth(truth, tmp_path / "t")
        assert load_truth(tmp_path / "t") == truth

    def test_pairs_default_label(self, tmp_path):
        (tmp_path / "p").write_text("q1 a 2\nq1 b\n")
        assert load_pairs(tmp_path / "p") == [("q1", "a", 2), ("q1", "b", 0)]

    def test_splits(self, tmp_path):
        write_splits({"q1": "train", "q2": "test"}, tmp_path / "s")
        assert load_splits(tmp_path / "s") == {"q1": "train", "q2": "test"}

    def test_labeled_lists(self, tmp_path):
        items = [LabeledList("q", ["a", "b"], [1.0, 0.25], [1, 0])]
        write_labeled_lists(items, tmp_path / "l")
        assert load_labeled_lists(tmp_path / "l") == items

    def test_labeled_list_invariants(self):
        with pytest.raises(FormatError):
            LabeledList("q", ["a", "b"], [1.0], [1, 0])
        with pytest.raises(FormatError):
            LabeledList("q", ["a"], [math.inf], [1])
