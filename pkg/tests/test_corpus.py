from __future__ import annotations

import io
import json
import os
import threading
from datetime import datetime, timezone

import pytest
from hypothesis import given, settings, strategies as st

from inspectkit.corpus import (
    CSV_COLUMNS,
    Corpus,
    CorpusStore,
    CsvImportError,
    DirectoryLock,
    LockBusyError,
    UnknownCommentError,
    export_csv,
    export_csv_text,
    import_csv,
)
from inspectkit.taxonomy import DesignLocation

from conftest import make_comment

EXPECTED_HEADER = (
    "comment_id,year,group,source,artifact,author_role,created_at,body,labels,"
    "labeler,project_id,frame_id,x,y,repo,pr_number,file_path,image_path"
)


class TestIngest:
    def test_new_comments_added(self):
        corpus = Corpus()
        report = corpus.ingest([make_comment(cid=f"c{i}") for i in range(3)])
        assert report.added == 3
        assert report.rejected == []

    def test_reingest_is_idempotent(self):
        corpus = Corpus()
        batch = [make_comment(cid=f"c{i}") for i in range(3)]
        corpus.ingest(batch)
        report = corpus.ingest(batch)
        assert report.added == 0
        assert len(corpus) == 3

    def test_invalid_comment_rejected(self):
        corpus = Corpus()
        report = corpus.ingest([make_comment(cid="bad", body="  ")])
        assert report.added == 0
        assert len(report.rejected) == 1
        assert any("empty body" in v for v in report.rejected[0][1])

    def test_assign_unknown_comment(self):
        corpus = Corpus()
        with pytest.raises(UnknownCommentError):
            corpus.assign("ghost", {"mistake"}, "human:x")


class TestExportCsv:
    def test_exact_header(self):
        text = export_csv_text(Corpus())
        assert text.splitlines()[0] == EXPECTED_HEADER

    def test_empty_corpus_header_only(self, tmp_path):
        out = tmp_path / "empty.csv"
        assert export_csv(Corpus(), out) == 0
        assert out.read_bytes() == (EXPECTED_HEADER + "\r\n").encode()

    def test_comma_body_is_quoted(self):
        corpus = Corpus()
        corpus.comments["c1"] = make_comment(body="fix, please")
        text = export_csv_text(corpus)
        assert '"fix, please"' in text

    def test_quotes_doubled(self):
        corpus = Corpus()
        corpus.comments["c1"] = make_comment(body='say "hi"')
        assert '"say ""hi"""' in export_csv_text(corpus)

    def test_labels_cell_in_taxonomy_order(self):
        corpus = Corpus()
        corpus.comments["c1"] = make_comment()
        corpus.assign("c1", {"format", "mistake"}, "human:alice")
        row = export_csv_text(corpus).splitlines()[1]
        assert "mistake;format" in row
        assert "human:alice" in row

    def test_one_row_per_comment(self, reference_corpus):
        text = export_csv_text(reference_corpus)
        assert len(text.splitlines()) - 1 == len(reference_corpus)


class TestImportCsv:
    def test_round_trip_small_corpus(self):
        corpus = Corpus()
        for i in range(10):
            corpus.comments[f"c{i:02d}"] = make_comment(cid=f"c{i:02d}", body=f"remark {i}")
        corpus.assign("c03", {"presentation"}, "human:a")
        corpus.assign("c07", {"mistake", "rationale"}, "ml-model:v1")
        back = import_csv(io.StringIO(export_csv_text(corpus)))
        assert back.comments == corpus.comments
        for cid in corpus.comments:
            assert back.effective_labels(cid) == corpus.effective_labels(cid)

    def test_wrong_header_names_first_mismatch(self):
        bad = EXPECTED_HEADER.replace("group", "grp")
        with pytest.raises(CsvImportError, match=r"column 3.*expected 'group'.*got 'grp'"):
            import_csv(io.StringIO(bad + "\r\n"))

    def test_unknown_label_has_line_number(self):
        corpus = Corpus()
        corpus.comments["c1"] = make_comment()
        corpus.assign("c1", {"mistake"}, "human:a")
        text = export_csv_text(corpus).replace("mistake", "speling")
        with pytest.raises(CsvImportError, match="line 2.*unknown label"):
            import_csv(io.StringIO(text))

    def test_bad_timestamp_has_line_number(self):
        corpus = Corpus()
        corpus.comments["c1"] = make_comment()
        text = export_csv_text(corpus).replace("2022-06-01T10:00:00Z", "yesterday")
        with pytest.raises(CsvImportError, match="line 2.*timestamp"):
            import_csv(io.StringIO(text))

    def test_row_arity_mismatch(self):
        text = EXPECTED_HEADER + "\r\nonly,three,fields\r\n"
        with pytest.raises(CsvImportError, match="expected 18 fields"):
            import_csv(io.StringIO(text))

    def test_design_tool_row_round_trips_coordinates(self):
        corpus = Corpus()
        corpus.comments["d1"] = make_comment(
            cid="d1", source="design-tool", location=DesignLocation("p1", "f1", 12.5, -3.0)
        )
        back = import_csv(io.StringIO(export_csv_text(corpus)))
        loc = back.comments["d1"].location
        assert (loc.x, loc.y) == (12.5, -3.0)
        assert isinstance(loc, DesignLocation)


def test_export_import_export_byte_identical(reference_corpus):
    t1 = export_csv_text(reference_corpus)
    t2 = export_csv_text(import_csv(io.StringIO(t1)))
    assert t1 == t2


_BODY_ALPHABET = st.sampled_from(
    list("abc XYZ09,;\"'\n\r\t") + list("画面遷移矛盾誤字コメントです")
)
_bodies = st.text(_BODY_ALPHABET, min_size=1, max_size=60).filter(lambda s: s.strip())
_label_sets = st.sets(st.sampled_from(["mistake", "format", "presentation", "rationale"]), min_size=1, max_size=3)


@settings(max_examples=150, deadline=None)
@given(st.lists(st.tuples(_bodies, st.one_of(st.none(), _label_sets)), min_size=1, max_size=5))
def test_quoting_round_trips_arbitrary_bodies(rows):
    corpus = Corpus()
    for i, (body, labels) in enumerate(rows):
        cid = f"c{i:03d}"
        corpus.comments[cid] = make_comment(cid=cid, body=body)
        if labels:
            corpus.assign(cid, labels, "human:fuzz")
    t1 = export_csv_text(corpus)
    back = import_csv(io.StringIO(t1))
    assert back.comments == corpus.comments
    for cid in corpus.comments:
        assert back.effective_labels(cid) == corpus.effective_labels(cid)
    assert export_csv_text(back) == t1


class TestCorpusStore:
    def test_save_load_round_trip(self, tmp_path):
        store = CorpusStore(tmp_path / "corpus")
        corpus = Corpus()
        corpus.comments["c1"] = make_comment(body="with 日本語 and \"quotes\"")
        corpus.assign("c1", {"presentation"}, "human:alice", scores=None)
        store.save(corpus)
        loaded = store.load()
        assert loaded.comments == corpus.comments
        assert loaded.assignments[0].labels == frozenset({"presentation"})
        assert loaded.assignments[0].labeler == "human:alice"

    def test_assignment_log_write_read_identity(self, tmp_path):
        store = CorpusStore(tmp_path / "corpus")
        corpus = Corpus()
        corpus.comments["c1"] = make_comment()
        t = datetime(2022, 3, 4, 5, 6, 7, 123456, tzinfo=timezone.utc)
        corpus.assign("c1", {"mistake"}, "ml-model:v2", scores={"mistake": 0.75}, assigned_at=t)
        corpus.assign("c1", {"format"}, "human:bob", assigned_at=t)
        store.save(corpus)
        loaded = store.load()
        assert loaded.assignments == corpus.assignments

    def test_load_missing_dir_is_empty(self, tmp_path):
        assert len(CorpusStore(tmp_path / "fresh").load()) == 0

    def test_bare_csv_synthesizes_assignments(self, tmp_path):
        directory = tmp_path / "corpus"
        directory.mkdir()
        corpus = Corpus()
        corpus.comments["c1"] = make_comment()
        corpus.assign("c1", {"mistake"}, "human:alice")
        export_csv(corpus, directory / "comments.csv")
        loaded = CorpusStore(directory).load()
        assert loaded.effective_labels("c1") == frozenset({"mistake"})

    def test_store_ingest_and_assign(self, tmp_path):
        store = CorpusStore(tmp_path / "corpus")
        report = store.ingest([make_comment(cid="c1"), make_comment(cid="c2")])
        assert report.added == 2
        store.assign("c1", {"mistake"}, "human:a")
        assert store.load().effective_labels("c1") == frozenset({"mistake"})
        assert store.ingest([make_comment(cid="c1")]).added == 0

    def test_lock_busy_raises(self, tmp_path):
        directory = tmp_path / "corpus"
        directory.mkdir()
        held = DirectoryLock(str(directory))
        held.__enter__()
        try:
            with pytest.raises(LockBusyError):
                with DirectoryLock(str(directory), blocking=False):
                    pass
        finally:
            held.__exit__(None, None, None)

    def test_writes_serialize_under_contention(self, tmp_path):
        store = CorpusStore(tmp_path / "corpus")
        store.ingest([make_comment(cid="c1")])
        errors = []

        def worker(n):
            try:
                for i in range(5):
                    store.assign("c1", {"mistake"}, f"human:w{n}")
            except Exception as exc:  # pragma: no cover
                errors.append(exc)

        threads = [threading.Thread(target=worker, args=(n,)) for n in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert errors == []
        assert len(store.load().assignments) == 20

    def test_jsonl_is_appendable_json_lines(self, tmp_path):
        store = CorpusStore(tmp_path / "corpus")
        store.ingest([make_comment(cid="c1")])
        store.assign("c1", {"mistake"}, "human:a")
        with open(store.log_path, encoding="utf-8") as fh:
            lines = [json.loads(line) for line in fh if line.strip()]
        assert lines[0]["comment_id"] == "c1"
        assert lines[0]["labels"] == ["mistake"]
