"""Design-tool to code-host bridge.

The pipeline: fetch every comment in a design project together with its
frame screenshot, composite a numbered pin image per comment, commit the
image to a dedicated ref in the image repository (blob -> tree -> commit ->
compare-and-swap ref), then post a PR comment that embeds the image
reference plus an idempotency marker. Re-running the whole thing against
unchanged inputs posts nothing: the marker makes every design comment
recognizable among existing PR comments.
"""

from __future__ import annotations

import logging
import math
import random
import re
import time
from dataclasses import dataclass, field
from datetime import datetime
from typing import Optional
from urllib.parse import quote, unquote

from PIL import Image

from . import gitstore
from .pins import render_pin
from .taxonomy import (
    AUTHOR_ROLES,
    CodeHostLocation,
    DesignLocation,
    InspectionComment,
)
from .timeutil import format_timestamp, parse_timestamp
from .transports import PRNotFoundError

log = logging.getLogger(__name__)

DEFAULT_IMAGE_REF = "refs/heads/inspection-images"
DEFAULT_AUTHOR = "inspection-bridge <bridge@localhost>"

MARKER_TAG = "inspection-sync"
_MARKER_RE = re.compile(r"<!--\s*" + MARKER_TAG + r"\s+v1\s+(.*?)\s*-->")
_IMAGE_LINE_RE = re.compile(r"^!\[pin[^\]]*\]\(.*\)$")


@dataclass
class DesignToolComment:
    remote_id: str
    frame_id: str
    frame_image: Image.Image
    x: float
    y: float
    body: str
    created_at: datetime
    parent_remote_id: Optional[str] = None


@dataclass
class FetchResult:
    comments: list[DesignToolComment]
    failures: list[tuple[str, str]]


@dataclass
class SyncReport:
    fetched: int = 0
    published_images: int = 0
    posted_comments: int = 0
    skipped_duplicates: int = 0
    failures: list[tuple[str, str]] = field(default_factory=list)


def fetch_design_comments(project_id: str, transport) -> FetchResult:
    """Pull all comments of a design project, paired with frame images.

    One bad record never sinks the batch: malformed payload entries and
    comments whose frame image cannot be fetched become failure entries
    while the rest are returned.
    """
    records = transport.project_comments(project_id)
    comments: list[DesignToolComment] = []
    failures: list[tuple[str, str]] = []
    seen: set[str] = set()

    for i, record in enumerate(records):
        label = str(record.get("remote_id") or f"record[{i}]") if isinstance(record, dict) else f"record[{i}]"
        try:
            if not isinstance(record, dict):
                raise ValueError("record is not an object")
            remote_id = record["remote_id"]
            if not isinstance(remote_id, str) or not remote_id:
                raise ValueError("missing remote_id")
            if remote_id in seen:
                raise ValueError("duplicate remote_id")
            frame_id = record["frame_id"]
            x = float(record["x"])
            y = float(record["y"])
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError("non-finite coordinates")
            body = record["body"]
            if not isinstance(body, str) or not body.strip():
                raise ValueError("empty body")
            created_at = parse_timestamp(record["created_at"])
            parent = record.get("parent_remote_id") or None
        except (KeyError, TypeError, ValueError) as exc:
            failures.append((label, f"malformed record: {exc}"))
            continue

        try:
            frame = transport.frame_image(project_id, frame_id)
        except Exception as exc:
            failures.append((remote_id, str(exc)))
            continue
        if frame.width < 1 or frame.height < 1:
            failures.append((remote_id, "empty frame image"))
            continue

        seen.add(remote_id)
        comments.append(
            DesignToolComment(
                remote_id=remote_id,
                frame_id=frame_id,
                frame_image=frame,
                x=x,
                y=y,
                body=body,
                created_at=created_at,
                parent_remote_id=parent,
            )
        )
    return FetchResult(comments=comments, failures=failures)


# -- idempotency marker ---------------------------------------------------


def format_marker(
    project_id: str,
    comment: DesignToolComment,
    image_path: str,
) -> str:
    """One HTML-comment line, invisible in rendered Markdown, that encodes
    the design-side identity and location of a synced comment."""
    fields = {
        "remote_id": comment.remote_id,
        "project": project_id,
        "frame": comment.frame_id,
        "x": repr(comment.x),
        "y": repr(comment.y),
        "created": format_timestamp(comment.created_at),
        "path": image_path,
    }
    encoded = " ".join(f"{k}={quote(str(v), safe='')}" for k, v in fields.items())
    return f"<!-- {MARKER_TAG} v1 {encoded} -->"


@dataclass(frozen=True)
class Marker:
    remote_id: str
    project_id: str
    frame_id: str
    x: float
    y: float
    created_at: datetime
    image_path: str


class MarkerError(ValueError):
    pass


def parse_marker(body: str) -> Optional[Marker]:
    """Extract the sync marker from a PR comment body.

    Returns None when no marker is present; raises MarkerError when a
    marker-looking line exists but does not decode.
    """
    match = _MARKER_RE.search(body)
    if match is None:
        return None
    fields: dict[str, str] = {}
    for token in match.group(1).split():
        key, sep, value = token.partition("=")
        if not sep:
            raise MarkerError(f"bad marker token: {token!r}")
        fields[key] = unquote(value)
    try:
        return Marker(
            remote_id=fields["remote_id"],
            project_id=fields["project"],
            frame_id=fields["frame"],
            x=float(fields["x"]),
            y=float(fields["y"]),
            created_at=parse_timestamp(fields["created"]),
            image_path=fields["path"],
        )
    except (KeyError, ValueError) as exc:
        raise MarkerError(f"undecodable marker: {exc}") from exc


def _synced_ids(pr_comments: list[dict]) -> set[tuple[str, str]]:
    """(project_id, remote_id) pairs already represented on the PR."""
    found: set[tuple[str, str]] = set()
    for record in pr_comments:
        try:
            marker = parse_marker(record.get("body", ""))
        except MarkerError:
            continue
        if marker is not None:
            found.add((marker.project_id, marker.remote_id))
    return found


# -- publishing -----------------------------------------------------------


def publish_image(
    store,
    ref_name: str,
    path: str,
    png_bytes: bytes,
    message: str,
    author: str = DEFAULT_AUTHOR,
    timestamp: Optional[int] = None,
    max_retries: int = 3,
    backoff: Optional[float] = None,
) -> tuple[str, str]:
    """Commit ``png_bytes`` at ``path`` on ``ref_name``; returns
    (commit digest, blob digest).

    The sequence is: read ref, read head commit, create blob, create tree
    (head's tree with the path upserted), create commit on the old head,
    compare-and-swap the ref. A CAS conflict re-reads and rebuilds, up to
    ``max_retries`` retries; ``backoff`` adds jittered sleeps for live
    stores (the in-memory store retries immediately).
    """
    gitstore.split_path(path)  # rejects empty paths early
    blob = store.put_blob(png_bytes)
    ts = timestamp if timestamp is not None else int(time.time())

    attempt = 0
    while True:
        old_head = store.read_ref(ref_name)
        base_tree = store.get_commit(old_head).tree if old_head is not None else None
        tree = gitstore.upsert_path(store, base_tree, path, blob)
        parents = (old_head,) if old_head is not None else ()
        commit = store.put_commit(tree, parents, author, message, ts)
        try:
            store.cas_ref(ref_name, old_head, commit)
            return commit, blob
        except gitstore.RefConflictError:
            attempt += 1
            if attempt > max_retries:
                raise gitstore.RefConflictError(
                    f"publish to {ref_name} gave up after {max_retries} retries"
                )
            if backoff:
                time.sleep(backoff * attempt * (1.0 + random.random() * 0.25))


def image_path_for(project_id: str, pr_number: int, remote_id: str) -> str:
    safe = quote(remote_id, safe="")
    return f"images/{quote(project_id, safe='')}/pr{pr_number}/{safe}.png"


def post_pr_comment(
    code_host,
    repo: str,
    pr_number: int,
    body: str,
    image_path: str,
    marker: str,
) -> str:
    """Post a PR comment: original text, then the rendered-image reference,
    then the invisible idempotency marker line."""
    full = f"{body}\n\n![pin]({image_path})\n{marker}"
    return code_host.post_comment(repo, pr_number, full)


def sync(
    project_id: str,
    repo: str,
    pr_number: int,
    design,
    code_host,
    store,
    ref_name: str = DEFAULT_IMAGE_REF,
    author: str = DEFAULT_AUTHOR,
) -> SyncReport:
    """Mirror every unsynced design comment into the PR conversation.

    Comments already carrying a marker on the PR are skipped; per-comment
    errors are collected without stopping the batch. Only total transport
    loss (unreachable PR/project) aborts.
    """
    result = fetch_design_comments(project_id, design)
    report = SyncReport(failures=list(result.failures))
    batch = sorted(result.comments, key=lambda c: (c.created_at, c.remote_id))
    report.fetched = len(batch) + len(result.failures)

    already = _synced_ids(code_host.list_pr_comments(repo, pr_number))
    index_of = {c.remote_id: i for i, c in enumerate(batch, start=1)}

    for index, comment in enumerate(batch, start=1):
        key = (project_id, comment.remote_id)
        if key in already:
            report.skipped_duplicates += 1
            continue
        try:
            pin = render_pin(comment.frame_image, comment.x, comment.y, index)
            path = image_path_for(project_id, pr_number, comment.remote_id)
            publish_image(
                store,
                ref_name,
                path,
                pin.png_bytes(),
                message=f"pin image for design comment {comment.remote_id}",
                author=author,
                timestamp=int(comment.created_at.timestamp()),
            )
            report.published_images += 1

            # Re-check right before posting: a concurrent sync of the same
            # (project, PR) pair may have posted this comment meanwhile.
            if key in _synced_ids(code_host.list_pr_comments(repo, pr_number)):
                report.skipped_duplicates += 1
                continue

            text = comment.body
            if comment.parent_remote_id is not None:
                if comment.parent_remote_id in index_of:
                    ref = f"pin {index_of[comment.parent_remote_id]}"
                else:
                    ref = comment.parent_remote_id
                text = f"reply to {ref}: {text}"
            marker = format_marker(project_id, comment, path)
            post_pr_comment(code_host, repo, pr_number, text, path, marker)
            report.posted_comments += 1
        except PRNotFoundError:
            raise
        except Exception as exc:
            log.warning("sync of comment %s failed: %s", comment.remote_id, exc)
            report.failures.append((comment.remote_id, str(exc)))
    return report


# -- pulling the unified corpus back out ----------------------------------

_GROUP_RE = re.compile(r"(?i)(g\d+)\s*$")


def infer_group(repo: str) -> str:
    """Team group from a repo name like ``course-2022-g1``; default G1."""
    match = _GROUP_RE.search(repo)
    return match.group(1).upper() if match else "G1"


def artifact_for_path(file_path: Optional[str]) -> str:
    if not file_path:
        return "other"
    lowered = file_path.lower()
    if "class" in lowered:
        return "class-diagram"
    if "sequence" in lowered or "seq" in lowered:
        return "sequence-diagram"
    if "state" in lowered:
        return "statechart"
    if "database" in lowered or "db" in lowered:
        return "database-spec"
    if lowered.endswith(".md"):
        return "functional-spec"
    return "other"


def _strip_sync_lines(body: str) -> str:
    kept = []
    for line in body.splitlines():
        if _MARKER_RE.search(line):
            continue
        if _IMAGE_LINE_RE.match(line.strip()):
            continue
        kept.append(line)
    return "\n".join(kept).strip()


def fetch_code_host_comments(
    repo: str,
    pr_number: int,
    transport,
    group: Optional[str] = None,
    default_role: str = "teaching-assistant",
) -> list[InspectionComment]:
    """Map every PR conversation comment into the unified corpus shape.

    Comments carrying a sync marker are attributed back to the design tool
    (decoded frame location, original creation time); a malformed marker
    keeps the comment as a code-host record and logs a warning.
    """
    records = transport.list_pr_comments(repo, pr_number)
    group = group or infer_group(repo)
    comments: list[InspectionComment] = []

    for record in records:
        remote_id = str(record.get("id", ""))
        body = record.get("body", "")
        created = parse_timestamp(record["created_at"])
        role = record.get("author_role") or default_role
        if role not in AUTHOR_ROLES:
            role = default_role

        marker: Optional[Marker] = None
        try:
            marker = parse_marker(body)
        except MarkerError as exc:
            log.warning("PR %s#%s comment %s: %s", repo, pr_number, remote_id, exc)

        if marker is not None:
            original = marker.created_at
            comments.append(
                InspectionComment(
                    id=f"dt:{marker.project_id}:{marker.remote_id}",
                    source="design-tool",
                    year=original.year,
                    group=group,
                    author_role=role,
                    artifact="screen-transition",
                    body=_strip_sync_lines(body),
                    created_at=original,
                    location=DesignLocation(
                        project_id=marker.project_id,
                        frame_id=marker.frame_id,
                        x=marker.x,
                        y=marker.y,
                    ),
                    image_path=marker.image_path,
                )
            )
        else:
            comments.append(
                InspectionComment(
                    id=f"ch:{repo}:{pr_number}:{remote_id}",
                    source="code-host",
                    year=created.year,
                    group=group,
                    author_role=role,
                    artifact=artifact_for_path(record.get("file_path")),
                    body=body,
                    created_at=created,
                    location=CodeHostLocation(
                        repo=repo,
                        pr_number=pr_number,
                        file_path=record.get("file_path"),
                    ),
                )
            )
    return comments
