"""HTTP/JSON API consumed by the triage dashboard.

Read-mostly: the only mutating endpoint is the label POST, which funnels
through the corpus directory lock (busy lock = 409, never an indefinite
block). Every GET re-reads the corpus from disk, so the service and the
CLI can be used side by side on the same directory.
"""

from __future__ import annotations

import os
from typing import Optional

from fastapi import FastAPI, HTTPException, Response
from pydantic import BaseModel

from . import analytics, classifier
from .config import ServiceConfig
from .corpus import Corpus, CorpusStore, LockBusyError, UnknownCommentError
from .gitstore import FileObjectStore, resolve_path
from .taxonomy import (
    CATEGORY_SLUGS,
    CodeHostLocation,
    DesignLocation,
    InspectionComment,
    TAXONOMY,
    is_category,
    taxonomy_sorted,
)
from .timeutil import format_timestamp


class LabelRequest(BaseModel):
    labels: list[str]
    labeler: str = "ui"


def _location_json(comment: InspectionComment) -> dict:
    loc = comment.location
    if isinstance(loc, DesignLocation):
        return {
            "kind": "design-tool",
            "project_id": loc.project_id,
            "frame_id": loc.frame_id,
            "x": loc.x,
            "y": loc.y,
        }
    assert isinstance(loc, CodeHostLocation)
    return {
        "kind": "code-host",
        "repo": loc.repo,
        "pr_number": loc.pr_number,
        "file_path": loc.file_path,
    }


def _comment_json(corpus: Corpus, comment: InspectionComment) -> dict:
    chosen = corpus.effective(comment.id)
    return {
        "id": comment.id,
        "source": comment.source,
        "year": comment.year,
        "group": comment.group,
        "author_role": comment.author_role,
        "artifact": comment.artifact,
        "body": comment.body,
        "created_at": format_timestamp(comment.created_at),
        "parent_id": comment.parent_id,
        "image_path": comment.image_path,
        "location": _location_json(comment),
        "labels": taxonomy_sorted(chosen.labels) if chosen else None,
        "labeler": chosen.labeler if chosen else None,
    }


def create_app(config: ServiceConfig, frontend_dir: Optional[str] = None) -> FastAPI:
    app = FastAPI(title="inspectkit", version="0.1.0")
    store = CorpusStore(config.corpus_dir)

    @app.get("/api/taxonomy")
    def get_taxonomy():
        return [
            {"slug": c.slug, "display_name": c.display_name, "definition": c.definition}
            for c in TAXONOMY
        ]

    @app.get("/api/comments")
    def list_comments(
        year: Optional[int] = None,
        group: Optional[str] = None,
        unlabeled: bool = False,
    ):
        corpus = store.load()
        out = []
        for cid in sorted(corpus.comments):
            comment = corpus.comments[cid]
            if year is not None and comment.year != year:
                continue
            if group is not None and comment.group != group:
                continue
            if unlabeled and corpus.effective_labels(cid) is not None:
                continue
            out.append(_comment_json(corpus, comment))
        return out

    @app.get("/api/comments/{comment_id}")
    def get_comment(comment_id: str):
        corpus = store.load()
        comment = corpus.comments.get(comment_id)
        if comment is None:
            raise HTTPException(status_code=404, detail=f"unknown comment: {comment_id}")
        return _comment_json(corpus, comment)

    @app.post("/api/comments/{comment_id}/labels")
    def post_labels(comment_id: str, request: LabelRequest):
        if not request.labels:
            raise HTTPException(status_code=422, detail="empty label set")
        bad = [s for s in request.labels if not is_category(s)]
        if bad:
            raise HTTPException(status_code=422, detail=f"unknown labels: {bad}")
        if not request.labeler.strip():
            raise HTTPException(status_code=422, detail="labeler name required")
        try:
            assignment = store.assign(
                comment_id, request.labels, f"human:{request.labeler}", blocking=False
            )
        except UnknownCommentError:
            raise HTTPException(status_code=404, detail=f"unknown comment: {comment_id}") from None
        except LockBusyError:
            raise HTTPException(status_code=409, detail="corpus is locked by another writer") from None
        return {
            "comment_id": comment_id,
            "labels": taxonomy_sorted(assignment.labels),
            "labeler": assignment.labeler,
        }

    @app.get("/api/suggestions/{comment_id}")
    def get_suggestions(comment_id: str):
        corpus = store.load()
        comment = corpus.comments.get(comment_id)
        if comment is None:
            raise HTTPException(status_code=404, detail=f"unknown comment: {comment_id}")
        if not os.path.exists(config.model_path):
            raise HTTPException(status_code=409, detail="no trained model")
        model = classifier.load_model(config.model_path)
        labels, scores = classifier.predict_text(model, comment.body)
        return {
            "comment_id": comment_id,
            "model_version": model.version,
            "threshold": model.threshold,
            "scores": [
                {"slug": slug, "score": scores[slug], "suggested": slug in labels}
                for slug in CATEGORY_SLUGS
            ],
        }

    @app.get("/api/stats")
    def get_stats():
        corpus = store.load()
        return {
            "groups": [
                {
                    "year": s.year,
                    "group": s.group,
                    "comment_total": s.comment_total,
                    "label_total": s.label_total,
                    "label_counts": s.label_counts,
                    "percentages": s.percentages,
                }
                for s in analytics.all_group_stats(corpus)
            ],
            "yearly_totals": analytics.yearly_comment_totals(corpus),
        }

    @app.get("/api/chart")
    def get_chart():
        return analytics.chart_data_json(store.load())

    @app.get("/api/images/{comment_id}")
    def get_image(comment_id: str):
        corpus = store.load()
        comment = corpus.comments.get(comment_id)
        if comment is None or not comment.image_path:
            raise HTTPException(status_code=404, detail="no image for this comment")
        images = FileObjectStore(config.imagestore_dir)
        head = images.read_ref(config.image_ref_name)
        if head is None:
            raise HTTPException(status_code=404, detail="image ref is empty")
        blob = resolve_path(images, images.get_commit(head).tree, comment.image_path)
        if blob is None:
            raise HTTPException(status_code=404, detail=f"image not found: {comment.image_path}")
        return Response(content=images.get_blob(blob), media_type="image/png")

    if frontend_dir and os.path.isdir(frontend_dir):
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="frontend")

    return app
