"""Core data model: the fixed 13-category comment classification scheme,
inspection comment records, and label-assignment bookkeeping.

The category list is a fixed vocabulary: exactly 13 entries, stable slugs,
stable order. Everything downstream (CSV columns, chart series, classifier
sub-models) keys off these slugs, so they must never be renamed or reordered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Mapping, Optional, Union


@dataclass(frozen=True)
class CategoryLabel:
    slug: str
    display_name: str
    definition: str


TAXONOMY: tuple[CategoryLabel, ...] = (
    CategoryLabel("short-description", "short description", "Lack of description"),
    CategoryLabel("excess", "excess", "Excess of description"),
    CategoryLabel("abstract", "abstract", "Too abstract description"),
    CategoryLabel("understandability", "understandability", "Difficult to understand the descriptions"),
    CategoryLabel("undefined", "undefined", "Undefined term"),
    CategoryLabel("inconsistent", "inconsistent", "Inconsistency among deliverables"),
    CategoryLabel("mistake", "mistake", "Obvious errors in description and model notation"),
    CategoryLabel("rationale", "rationale", "Unknown design basis"),
    CategoryLabel("short-items", "short items", "Lack of information to be stated"),
    CategoryLabel("missed-inspection", "missed inspection comments", "Unmodified to previous inspections"),
    CategoryLabel("presentation", "presentation", "Inappropriately worded"),
    CategoryLabel("enhancement-request", "enhancement request", "Suggestions for improvements to specifications"),
    CategoryLabel("format", "format", "Document formatting deficiencies"),
)

CATEGORY_SLUGS: tuple[str, ...] = tuple(c.slug for c in TAXONOMY)
_SLUG_INDEX = {slug: i for i, slug in enumerate(CATEGORY_SLUGS)}


def taxonomy() -> list[CategoryLabel]:
    """The 13 categories in canonical order. Pure and constant."""
    return list(TAXONOMY)


def is_category(slug: str) -> bool:
    return slug in _SLUG_INDEX


def taxonomy_sorted(slugs: Iterable[str]) -> list[str]:
    """Sort category slugs into canonical taxonomy order."""
    return sorted(slugs, key=_SLUG_INDEX.__getitem__)


@dataclass(frozen=True)
class ArtifactKind:
    slug: str
    display_name: str
    notation: str


ARTIFACT_KINDS: tuple[ArtifactKind, ...] = (
    ArtifactKind("functional-spec", "Functional specification", "Markdown"),
    ArtifactKind("screen-transition", "Screen transition diagram", "figma"),
    ArtifactKind("class-diagram", "class diagram", "plant UML"),
    ArtifactKind("database-spec", "Database specification", "Markdown"),
    ArtifactKind("sequence-diagram", "Sequence Diagram", "plant UML"),
    ArtifactKind("statechart", "state chart diagram", "plant UML"),
    # Catch-all for artifacts outside the named set (plans, reports, code).
    ArtifactKind("other", "other", "text"),
)

ARTIFACT_SLUGS: tuple[str, ...] = tuple(a.slug for a in ARTIFACT_KINDS)

SOURCES = ("design-tool", "code-host")
AUTHOR_ROLES = ("teacher", "teaching-assistant", "student")


@dataclass(frozen=True)
class DesignLocation:
    """Position of a comment inside a design-tool project.

    x/y may be negative or exceed the frame bounds; clamping happens at
    pin-render time, not here.
    """

    project_id: str
    frame_id: str
    x: float
    y: float


@dataclass(frozen=True)
class CodeHostLocation:
    repo: str
    pr_number: int
    file_path: Optional[str] = None


SourceLocation = Union[DesignLocation, CodeHostLocation]


@dataclass
class InspectionComment:
    """One review remark, from either platform, in the unified corpus shape."""

    id: str
    source: str
    year: int
    group: str
    author_role: str
    artifact: str
    body: str
    created_at: datetime
    location: SourceLocation
    parent_id: Optional[str] = None
    image_path: Optional[str] = None


def validate_comment(
    comment: InspectionComment,
    known: Optional[Mapping[str, InspectionComment]] = None,
) -> list[str]:
    """Return every invariant violation for ``comment`` (empty list = ok).

    Violations are data, not faults: nothing is raised. Parent linkage is
    only checked when a ``known`` comment map is supplied.
    """
    violations: list[str] = []
    if not comment.id:
        violations.append("empty id")
    if not comment.body.strip():
        violations.append("empty body")
    if comment.source not in SOURCES:
        violations.append(f"unknown source: {comment.source!r}")
    if comment.author_role not in AUTHOR_ROLES:
        violations.append(f"unknown author role: {comment.author_role!r}")
    if comment.artifact not in ARTIFACT_SLUGS:
        violations.append(f"unknown artifact kind: {comment.artifact!r}")
    if comment.created_at.tzinfo is None:
        violations.append("naive timestamp (must be UTC-aware)")

    loc = comment.location
    if comment.source == "design-tool":
        if not isinstance(loc, DesignLocation):
            violations.append("location/source mismatch")
        else:
            if not (math.isfinite(loc.x) and math.isfinite(loc.y)):
                violations.append("non-finite coordinates")
    elif comment.source == "code-host":
        if not isinstance(loc, CodeHostLocation):
            violations.append("location/source mismatch")
        elif loc.pr_number < 1:
            violations.append("pr_number must be positive")

    if comment.parent_id is not None and known is not None:
        parent = known.get(comment.parent_id)
        if parent is None:
            violations.append(f"unknown parent: {comment.parent_id}")
        elif parent.source != comment.source:
            violations.append("parent source mismatch")
    return violations


# Labeler identifiers: "human:<name>", "rule-baseline", or "ml-model:<version>".
RULE_BASELINE_LABELER = "rule-baseline"


def is_human_labeler(labeler: str) -> bool:
    return labeler.startswith("human:")


def is_valid_labeler(labeler: str) -> bool:
    if labeler == RULE_BASELINE_LABELER:
        return True
    for prefix in ("human:", "ml-model:"):
        if labeler.startswith(prefix) and len(labeler) > len(prefix):
            return True
    return False


@dataclass
class LabelAssignment:
    """One labeling event: who assigned which categories to which comment.

    Assignments are append-only; the effective label set of a comment is
    resolved by :func:`effective_assignment`, never by mutating history.
    """

    comment_id: str
    labels: frozenset[str]
    labeler: str
    assigned_at: datetime
    scores: Optional[dict[str, float]] = None


def make_assignment(
    comment_id: str,
    labels: Iterable[str],
    labeler: str,
    scores: Optional[Mapping[str, float]] = None,
    assigned_at: Optional[datetime] = None,
) -> LabelAssignment:
    """Build a validated assignment. Raises ValueError on bad input."""
    label_set = frozenset(labels)
    if not label_set:
        raise ValueError("empty label set")
    for slug in label_set:
        if not is_category(slug):
            raise ValueError(f"unknown label: {slug!r}")
    if not is_valid_labeler(labeler):
        raise ValueError(f"invalid labeler: {labeler!r}")
    if scores is not None:
        for slug, p in scores.items():
            if not is_category(slug):
                raise ValueError(f"unknown label in scores: {slug!r}")
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"score out of range for {slug}: {p}")
    if assigned_at is None:
        assigned_at = datetime.now(timezone.utc)
    return LabelAssignment(
        comment_id=comment_id,
        labels=label_set,
        labeler=labeler,
        assigned_at=assigned_at,
        scores=dict(scores) if scores is not None else None,
    )


def effective_assignment(
    assignments: Iterable[LabelAssignment], comment_id: str
) -> Optional[LabelAssignment]:
    """Resolve the assignment that currently counts for a comment.

    Human assignments take precedence over machine ones; within each class
    the latest appended entry wins. Returns None for unlabeled comments.
    """
    latest_human: Optional[LabelAssignment] = None
    latest_machine: Optional[LabelAssignment] = None
    for a in assignments:
        if a.comment_id != comment_id:
            continue
        if is_human_labeler(a.labeler):
            latest_human = a
        else:
            latest_machine = a
    return latest_human if latest_human is not None else latest_machine


def effective_labels(
    assignments: Iterable[LabelAssignment], comment_id: str
) -> Optional[frozenset[str]]:
    chosen = effective_assignment(assignments, comment_id)
    return chosen.labels if chosen is not None else None
