"""Deterministic fixture corpora and fixture directory trees.

The reference corpus reproduces the published three-year classification
counts exactly: per (year, group), each category's label count and the
group's distinct-comment total are encoded by construction. Label slots
are dealt round-robin over the group's comments, grouped by category, so
no comment ever receives the same label twice and every comment gets at
least one label.

The 2020 cohort had two teams but only a combined comment total was
published; the 96/75 split below is our choice, constrained by the
per-team label totals (110 and 85) and the 171 sum.
"""

from __future__ import annotations

import os
from datetime import datetime, timedelta, timezone

from PIL import Image

from .corpus import Corpus
from .taxonomy import CATEGORY_SLUGS, CodeHostLocation, InspectionComment
from .transports import write_json
from .timeutil import format_timestamp

# Label counts per category, taxonomy order, per (year, group).
REFERENCE_COUNTS: dict[tuple[int, str], dict[str, int]] = {
    (2022, "G1"): dict(zip(CATEGORY_SLUGS, [50, 13, 22, 6, 3, 10, 24, 22, 1, 2, 57, 53, 6])),
    (2021, "G1"): dict(zip(CATEGORY_SLUGS, [3, 2, 8, 6, 0, 8, 22, 18, 2, 0, 21, 33, 0])),
    (2020, "G1"): dict(zip(CATEGORY_SLUGS, [14, 0, 8, 8, 0, 11, 21, 13, 2, 1, 11, 19, 2])),
    (2020, "G2"): dict(zip(CATEGORY_SLUGS, [14, 1, 2, 3, 2, 6, 12, 6, 0, 0, 12, 27, 0])),
}

# Distinct inspection comments per (year, group).
REFERENCE_COMMENT_TOTALS: dict[tuple[int, str], int] = {
    (2022, "G1"): 264,
    (2021, "G1"): 117,
    (2020, "G1"): 96,
    (2020, "G2"): 75,
}

REFERENCE_YEARLY_TOTALS = {2022: 264, 2021: 117, 2020: 171}

# One signature phrase per category; multi-label comments concatenate the
# phrases of their labels, which keeps the text separable for training.
PHRASES = {
    "short-description": "the section gives no description of the expected behavior",
    "excess": "this part is too long and repeats earlier material",
    "abstract": "the explanation stays vague, make it concrete",
    "understandability": "hard to understand what this paragraph means",
    "undefined": "the term used here is undefined, 用語の定義がありません",
    "inconsistent": "inconsistent with the class diagram, 矛盾しています",
    "mistake": "incorrect cardinality, an obvious notation mistake",
    "rationale": "why was this design chosen, the basis is unclear",
    "short-items": "a required section is missing item entries",
    "missed-inspection": "pointed out before and still not fixed",
    "presentation": "typo in the heading, check the spelling, 誤字があります",
    "enhancement-request": "suggest adding an export button as an improvement",
    "format": "the table layout breaks the document formatting rules",
}

_ARTIFACT_CYCLE = (
    "functional-spec",
    "screen-transition",
    "class-diagram",
    "database-spec",
    "sequence-diagram",
    "statechart",
)


def _deal_labels(counts: dict[str, int], n_comments: int) -> list[set[str]]:
    """Deal category slots onto comments so every count lands exactly.

    Slots are laid out grouped by category (taxonomy order) and dealt to
    comment ``slot_index mod n``. Since each category has at most ``n``
    slots, a category never hits the same comment twice.
    """
    labels: list[set[str]] = [set() for _ in range(n_comments)]
    position = 0
    for slug in CATEGORY_SLUGS:
        count = counts.get(slug, 0)
        if count > n_comments:
            raise ValueError(f"{slug}: {count} labels cannot spread over {n_comments} comments")
        for _ in range(count):
            labels[position % n_comments].add(slug)
            position += 1
    if position < n_comments:
        raise ValueError("fewer label slots than comments: some comment would stay unlabeled")
    return labels


def build_reference_corpus() -> Corpus:
    """The shipped three-year corpus with exact per-category counts."""
    corpus = Corpus()
    for (year, group), counts in REFERENCE_COUNTS.items():
        total = REFERENCE_COMMENT_TOTALS[(year, group)]
        dealt = _deal_labels(counts, total)
        repo = f"course-{year}-{group.lower()}"
        start = datetime(year, 1, 10, 9, 0, 0, tzinfo=timezone.utc)
        for i, label_set in enumerate(dealt, start=1):
            ordered = [s for s in CATEGORY_SLUGS if s in label_set]
            body = "; ".join(PHRASES[s] for s in ordered) + f" [case {i:04d}]"
            created = start + timedelta(hours=7 * (i - 1))
            comment = InspectionComment(
                id=f"tv-{year}-{group.lower()}-{i:04d}",
                source="code-host",
                year=year,
                group=group,
                author_role="teaching-assistant" if i % 3 else "teacher",
                artifact=_ARTIFACT_CYCLE[i % len(_ARTIFACT_CYCLE)],
                body=body,
                created_at=created,
                location=CodeHostLocation(repo=repo, pr_number=1 + i % 5),
            )
            corpus.comments[comment.id] = comment
            corpus.assign(comment.id, label_set, "human:staff", assigned_at=created)
    return corpus


# -- bridge fixture trees -----------------------------------------------------


def write_frame_png(path: str, width: int, height: int, color=(245, 245, 245, 255)) -> None:
    os.makedirs(os.path.dirname(path), exist_ok=True)
    Image.new("RGBA", (width, height), color).save(path, format="PNG")


def write_design_project(
    root: str,
    project_id: str,
    comments: list[dict],
    frames: dict[str, tuple[int, int]],
) -> None:
    """Materialize a design-tool project fixture under ``root``."""
    project_dir = os.path.join(root, "project", project_id)
    os.makedirs(project_dir, exist_ok=True)
    write_json(os.path.join(project_dir, "comments.json"), comments)
    for frame_id, (w, h) in frames.items():
        write_frame_png(os.path.join(project_dir, "frames", f"{frame_id}.png"), w, h)


def write_pr_fixture(root: str, repo: str, pr_number: int, comments: list[dict] | None = None) -> None:
    pr_dir = os.path.join(root, "repo", repo, "pr", str(pr_number))
    os.makedirs(pr_dir, exist_ok=True)
    write_json(os.path.join(pr_dir, "comments.json"), comments or [])


def design_comment(
    remote_id: str,
    frame_id: str,
    x: float,
    y: float,
    body: str,
    created_at: datetime,
    parent_remote_id: str | None = None,
) -> dict:
    return {
        "remote_id": remote_id,
        "frame_id": frame_id,
        "x": x,
        "y": y,
        "body": body,
        "created_at": format_timestamp(created_at),
        "parent_remote_id": parent_remote_id,
    }


def seed_demo_fixtures(
    root: str,
    project_id: str = "demo-project",
    repo: str = "course-2022-g1",
    pr_number: int = 7,
) -> tuple[str, str, int]:
    """A small offline playground: one design project with three comments
    (one reply, one off-frame coordinate) and an empty PR to sync into."""
    t0 = datetime(2022, 6, 1, 10, 0, 0, tzinfo=timezone.utc)
    comments = [
        design_comment("c1", "frame-1", 40, 30, "typo in the heading, check the spelling", t0),
        design_comment(
            "c2", "frame-1", 80, 52, "わかりにくい説明です, hard to understand", t0 + timedelta(minutes=10), "c1"
        ),
        design_comment(
            "c3", "frame-2", 260, -15, "inconsistent with the class diagram", t0 + timedelta(minutes=20)
        ),
    ]
    write_design_project(root, project_id, comments, {"frame-1": (200, 120), "frame-2": (160, 90)})
    write_pr_fixture(root, repo, pr_number)
    return project_id, repo, pr_number
