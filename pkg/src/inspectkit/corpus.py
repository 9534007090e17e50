"""Unified comment corpus: persistence, CSV canonical form, label log.

Storage is a plain directory:

    corpus/comments.csv       one row per comment, canonical column set
    corpus/assignments.jsonl  append-only label-assignment log

The CSV is the source of truth for comments; the JSONL log is the full
assignment history (the CSV ``labels`` column is the derived effective
set). Writers take an exclusive advisory lock on the directory, readers
never block.
"""

from __future__ import annotations

import csv
import fcntl
import io
import json
import os
from dataclasses import dataclass, field
from datetime import datetime
from typing import Iterable, Optional, Union

from .taxonomy import (
    CodeHostLocation,
    DesignLocation,
    InspectionComment,
    LabelAssignment,
    SourceLocation,
    effective_assignment,
    is_category,
    make_assignment,
    taxonomy_sorted,
    validate_comment,
)
from .timeutil import format_timestamp, parse_timestamp

CSV_COLUMNS = (
    "comment_id",
    "year",
    "group",
    "source",
    "artifact",
    "author_role",
    "created_at",
    "body",
    "labels",
    "labeler",
    "project_id",
    "frame_id",
    "x",
    "y",
    "repo",
    "pr_number",
    "file_path",
    "image_path",
)

LABEL_JOIN = ";"


class UnknownCommentError(KeyError):
    pass


class CsvImportError(ValueError):
    """Import failure, pinned to a line number where applicable."""

    def __init__(self, message: str, line: Optional[int] = None) -> None:
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line


class LockBusyError(RuntimeError):
    """Another writer holds the corpus lock."""


@dataclass
class IngestReport:
    added: int = 0
    rejected: list[tuple[str, list[str]]] = field(default_factory=list)


class Corpus:
    """In-memory snapshot: comments by id plus the assignment log."""

    def __init__(self) -> None:
        self.comments: dict[str, InspectionComment] = {}
        self.assignments: list[LabelAssignment] = []

    def ingest(self, comments: Iterable[InspectionComment]) -> IngestReport:
        """Upsert validated comments by id; idempotent for identical data.

        Invalid comments are rejected (reported, not raised); re-ingesting
        an already-present id does not count as an addition.
        """
        report = IngestReport()
        for comment in comments:
            violations = validate_comment(comment, known=self.comments)
            if violations:
                report.rejected.append((comment.id, violations))
                continue
            if comment.id not in self.comments:
                report.added += 1
            self.comments[comment.id] = comment
        return report

    def assign(
        self,
        comment_id: str,
        labels: Iterable[str],
        labeler: str,
        scores=None,
        assigned_at: Optional[datetime] = None,
    ) -> LabelAssignment:
        if comment_id not in self.comments:
            raise UnknownCommentError(comment_id)
        assignment = make_assignment(comment_id, labels, labeler, scores=scores, assigned_at=assigned_at)
        self.assignments.append(assignment)
        return assignment

    def effective(self, comment_id: str) -> Optional[LabelAssignment]:
        return effective_assignment(self.assignments, comment_id)

    def effective_labels(self, comment_id: str) -> Optional[frozenset[str]]:
        chosen = self.effective(comment_id)
        return chosen.labels if chosen is not None else None

    def provenance(self) -> dict[str, SourceLocation]:
        return {cid: c.location for cid, c in self.comments.items()}

    def __len__(self) -> int:
        return len(self.comments)


# -- canonical CSV ---------------------------------------------------------


def _fmt_num(value: float) -> str:
    if value == int(value):
        return str(int(value))
    return repr(value)


def _comment_row(comment: InspectionComment, chosen: Optional[LabelAssignment]) -> list[str]:
    loc = comment.location
    design = loc if isinstance(loc, DesignLocation) else None
    host = loc if isinstance(loc, CodeHostLocation) else None
    labels = LABEL_JOIN.join(taxonomy_sorted(chosen.labels)) if chosen else ""
    return [
        comment.id,
        str(comment.year),
        comment.group,
        comment.source,
        comment.artifact,
        comment.author_role,
        format_timestamp(comment.created_at),
        comment.body,
        labels,
        chosen.labeler if chosen else "",
        design.project_id if design else "",
        design.frame_id if design else "",
        _fmt_num(design.x) if design else "",
        _fmt_num(design.y) if design else "",
        host.repo if host else "",
        str(host.pr_number) if host else "",
        (host.file_path or "") if host else "",
        comment.image_path or "",
    ]


def export_csv(corpus: Corpus, destination: Union[str, os.PathLike, io.TextIOBase]) -> int:
    """Write the canonical CSV; returns the number of comment rows.

    RFC-4180 output: CRLF line ends, minimal quoting with doubled quotes,
    rows sorted by comment id, effective labels joined by ``;`` in taxonomy
    order. One row per comment regardless of how many labels it carries.
    """

    def _write(fh) -> int:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        count = 0
        for cid in sorted(corpus.comments):
            comment = corpus.comments[cid]
            writer.writerow(_comment_row(comment, corpus.effective(cid)))
            count += 1
        return count

    if isinstance(destination, (str, os.PathLike)):
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            return _write(fh)
    return _write(destination)


def export_csv_text(corpus: Corpus) -> str:
    buf = io.StringIO()
    export_csv(corpus, buf)
    return buf.getvalue()


def _parse_row(row: list[str], line: int) -> tuple[InspectionComment, Optional[LabelAssignment]]:
    if len(row) != len(CSV_COLUMNS):
        raise CsvImportError(f"expected {len(CSV_COLUMNS)} fields, found {len(row)}", line)
    rec = dict(zip(CSV_COLUMNS, row))

    try:
        created_at = parse_timestamp(rec["created_at"])
    except ValueError as exc:
        raise CsvImportError(f"unparseable timestamp: {exc}", line) from None
    try:
        year = int(rec["year"])
    except ValueError:
        raise CsvImportError(f"bad year: {rec['year']!r}", line) from None

    location: SourceLocation
    if rec["source"] == "design-tool":
        try:
            location = DesignLocation(
                project_id=rec["project_id"],
                frame_id=rec["frame_id"],
                x=float(rec["x"]),
                y=float(rec["y"]),
            )
        except ValueError:
            raise CsvImportError("bad design-tool coordinates", line) from None
    elif rec["source"] == "code-host":
        try:
            location = CodeHostLocation(
                repo=rec["repo"],
                pr_number=int(rec["pr_number"]),
                file_path=rec["file_path"] or None,
            )
        except ValueError:
            raise CsvImportError(f"bad pr_number: {rec['pr_number']!r}", line) from None
    else:
        raise CsvImportError(f"unknown source: {rec['source']!r}", line)

    comment = InspectionComment(
        id=rec["comment_id"],
        source=rec["source"],
        year=year,
        group=rec["group"],
        author_role=rec["author_role"],
        artifact=rec["artifact"],
        body=rec["body"],
        created_at=created_at,
        location=location,
        image_path=rec["image_path"] or None,
    )
    violations = validate_comment(comment)
    if violations:
        raise CsvImportError("; ".join(violations), line)

    assignment: Optional[LabelAssignment] = None
    if rec["labels"]:
        slugs = rec["labels"].split(LABEL_JOIN)
        for slug in slugs:
            if not is_category(slug):
                raise CsvImportError(f"unknown label: {slug!r}", line)
        if not rec["labeler"]:
            raise CsvImportError("labels present but labeler missing", line)
        try:
            assignment = make_assignment(rec["comment_id"], slugs, rec["labeler"], assigned_at=created_at)
        except ValueError as exc:
            raise CsvImportError(str(exc), line) from None
    return comment, assignment


def import_csv(source: Union[str, os.PathLike, io.TextIOBase]) -> Corpus:
    """Inverse of :func:`export_csv`. Header must match bit-exactly;
    any row defect raises with its line number."""

    def _read(fh) -> Corpus:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvImportError("empty file: missing header") from None
        for i, (expected, got) in enumerate(zip(CSV_COLUMNS, header)):
            if expected != got:
                raise CsvImportError(f"header mismatch at column {i + 1}: expected {expected!r}, got {got!r}")
        if len(header) != len(CSV_COLUMNS):
            raise CsvImportError(f"header has {len(header)} columns, expected {len(CSV_COLUMNS)}")

        corpus = Corpus()
        for row in reader:
            line = reader.line_num
            comment, assignment = _parse_row(row, line)
            corpus.comments[comment.id] = comment
            if assignment is not None:
                corpus.assignments.append(assignment)
        return corpus

    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return _read(fh)
    return _read(source)


# -- assignment log ---------------------------------------------------------


def _assignment_to_json(a: LabelAssignment) -> dict:
    return {
        "comment_id": a.comment_id,
        "labels": taxonomy_sorted(a.labels),
        "labeler": a.labeler,
        "assigned_at": format_timestamp(a.assigned_at),
        "scores": a.scores,
    }


def _assignment_from_json(payload: dict) -> LabelAssignment:
    return make_assignment(
        payload["comment_id"],
        payload["labels"],
        payload["labeler"],
        scores=payload.get("scores"),
        assigned_at=parse_timestamp(payload["assigned_at"]),
    )


# -- directory store ---------------------------------------------------------


class DirectoryLock:
    """Exclusive advisory lock on a corpus directory (flock on a lock file)."""

    def __init__(self, directory: str, blocking: bool = True) -> None:
        self._path = os.path.join(directory, ".lock")
        self._blocking = blocking
        self._fh = None

    def __enter__(self) -> "DirectoryLock":
        self._fh = open(self._path, "a+")
        flags = fcntl.LOCK_EX
        if not self._blocking:
            flags |= fcntl.LOCK_NB
        try:
            fcntl.flock(self._fh.fileno(), flags)
        except BlockingIOError:
            self._fh.close()
            self._fh = None
            raise LockBusyError("corpus directory is locked by another writer") from None
        return self

    def __exit__(self, *exc) -> None:
        if self._fh is not None:
            fcntl.flock(self._fh.fileno(), fcntl.LOCK_UN)
            self._fh.close()
            self._fh = None


class CorpusStore:
    """Single-writer directory persistence for a corpus."""

    def __init__(self, directory: str | os.PathLike[str]) -> None:
        self.directory = os.fspath(directory)
        os.makedirs(self.directory, exist_ok=True)

    @property
    def csv_path(self) -> str:
        return os.path.join(self.directory, "comments.csv")

    @property
    def log_path(self) -> str:
        return os.path.join(self.directory, "assignments.jsonl")

    def lock(self, blocking: bool = True) -> DirectoryLock:
        return DirectoryLock(self.directory, blocking=blocking)

    def load(self) -> Corpus:
        """Read the corpus back; a bare CSV (no log) yields synthesized
        assignments from its labels column."""
        if not os.path.exists(self.csv_path):
            return Corpus()
        corpus = import_csv(self.csv_path)
        if os.path.exists(self.log_path):
            corpus.assignments = []
            with open(self.log_path, "r", encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        corpus.assignments.append(_assignment_from_json(json.loads(line)))
        return corpus

    def save(self, corpus: Corpus) -> None:
        """Rewrite both files from the snapshot (caller holds the lock)."""
        tmp = self.csv_path + ".tmp"
        export_csv(corpus, tmp)
        os.replace(tmp, self.csv_path)
        tmp = self.log_path + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            for assignment in corpus.assignments:
                fh.write(json.dumps(_assignment_to_json(assignment), ensure_ascii=False) + "\n")
        os.replace(tmp, self.log_path)

    def ingest(self, comments: Iterable[InspectionComment], blocking: bool = True) -> IngestReport:
        with self.lock(blocking=blocking):
            corpus = self.load()
            report = corpus.ingest(comments)
            self.save(corpus)
        return report

    def assign(
        self,
        comment_id: str,
        labels: Iterable[str],
        labeler: str,
        scores=None,
        blocking: bool = True,
    ) -> LabelAssignment:
        with self.lock(blocking=blocking):
            corpus = self.load()
            assignment = corpus.assign(comment_id, labels, labeler, scores=scores)
            self.save(corpus)
        return assignment
