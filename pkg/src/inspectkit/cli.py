"""Command-line entry points.

Exit codes: 0 success, 1 partial or operational failure, 2 usage error.
Every command works offline against a fixture directory; live transports
are opt-in via the config file.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional

from . import analytics, bridge, classifier, fixtures
from .config import ServiceConfig, load_config
from .corpus import CorpusStore, export_csv
from .gitstore import FileObjectStore
from .taxonomy import CATEGORY_SLUGS, TAXONOMY, is_category, taxonomy_sorted
from .transports import (
    FixtureCodeHostTransport,
    FixtureDesignTransport,
    HttpCodeHostTransport,
    HttpDesignTransport,
    TransportError,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="inspectkit",
        description="Aggregate, publish, classify and analyze inspection comments.",
    )
    parser.add_argument("--corpus", default=None, help="corpus directory (default: ./corpus)")
    parser.add_argument("--config", default=None, help="JSON config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sync", help="mirror design-tool comments into a PR and ingest everything")
    p.add_argument("--project", required=True, help="design-tool project id")
    p.add_argument("--repo", required=True)
    p.add_argument("--pr", required=True, type=int)
    p.add_argument("--fixtures", default=None, help="fixture directory (offline mode)")
    p.add_argument(
        "--no-baseline",
        action="store_true",
        help="skip keyword-baseline labels for newly ingested comments",
    )

    p = sub.add_parser("export", help="write the corpus CSV")
    p.add_argument("--out", required=True)

    p = sub.add_parser("stats", help="per-group category counts and shares")
    p.add_argument("--year", type=int, default=None)
    p.add_argument("--group", default=None)
    p.add_argument("--svg", default=None, help="also render the share chart to this file")

    p = sub.add_parser("label", help="record a human label assignment")
    p.add_argument("comment_id")
    p.add_argument("slugs", help="comma-separated category slugs")
    p.add_argument("--by", default="cli", help="labeler name (default: cli)")

    p = sub.add_parser("train", help="train the suggestion model")
    p.add_argument("--out", default=None, help="model file (default: <corpus>/model.json)")
    p.add_argument("--version", default="v1")

    p = sub.add_parser("suggest", help="print classifier scores for a comment")
    p.add_argument("comment_id")
    p.add_argument("--model", default=None, help="model file (default: <corpus>/model.json)")

    p = sub.add_parser("serve", help="run the HTTP API (and dashboard, if built)")
    p.add_argument("--listen", default=None, help="host:port (default from config)")

    p = sub.add_parser("seed-demo", help="write a small offline fixture tree")
    p.add_argument("--out", required=True)
    return parser


def _load_service_config(args) -> ServiceConfig:
    overrides = {"corpus_dir": args.corpus}
    if getattr(args, "fixtures", None):
        overrides["fixture_dir"] = args.fixtures
    if getattr(args, "listen", None):
        overrides["listen_address"] = args.listen
    return load_config(args.config, **overrides)


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 1


def _transports(config: ServiceConfig):
    if config.live_mode:
        return (
            HttpDesignTransport(config.design_base_url),
            HttpCodeHostTransport(config.codehost_base_url),
        )
    if not config.fixture_dir:
        raise TransportError("no fixture directory configured (pass --fixtures or set fixture_dir)")
    if not os.path.isdir(config.fixture_dir):
        raise TransportError(f"fixture directory not found: {config.fixture_dir}")
    return (
        FixtureDesignTransport(config.fixture_dir),
        FixtureCodeHostTransport(config.fixture_dir),
    )


def cmd_sync(args) -> int:
    config = _load_service_config(args)
    try:
        design, code_host = _transports(config)
        store = FileObjectStore(config.imagestore_dir)
        report = bridge.sync(
            args.project,
            args.repo,
            args.pr,
            design,
            code_host,
            store,
            ref_name=config.image_ref_name,
        )
    except TransportError as exc:
        return _fail(str(exc))

    rows = [
        ("fetched", report.fetched),
        ("published images", report.published_images),
        ("posted comments", report.posted_comments),
        ("skipped duplicates", report.skipped_duplicates),
        ("failures", len(report.failures)),
    ]
    for name, value in rows:
        print(f"{name:<20}{value:>6}")
    for remote_id, reason in report.failures:
        print(f"  failed {remote_id}: {reason}", file=sys.stderr)

    comments = bridge.fetch_code_host_comments(args.repo, args.pr, code_host)
    corpus_store = CorpusStore(config.corpus_dir)
    ingest = corpus_store.ingest(comments)
    print(f"{'ingested':<20}{ingest.added:>6}")
    for cid, violations in ingest.rejected:
        print(f"  rejected {cid}: {'; '.join(violations)}", file=sys.stderr)

    if not args.no_baseline:
        labeled = _apply_baseline(corpus_store)
        print(f"{'baseline labels':<20}{labeled:>6}")

    return 1 if report.failures or ingest.rejected else 0


def _apply_baseline(corpus_store: CorpusStore) -> int:
    """Keyword-label every comment that has no effective labels yet.

    Baseline assignments are machine labels: any later human assignment
    takes precedence, so triage work is never overwritten.
    """
    rules = classifier.load_keyword_rules()
    with corpus_store.lock():
        corpus = corpus_store.load()
        count = 0
        for cid in sorted(corpus.comments):
            if corpus.effective_labels(cid) is None:
                assignment = classifier.rule_baseline(corpus.comments[cid], rules=rules)
                corpus.assignments.append(assignment)
                count += 1
        corpus_store.save(corpus)
    return count


def cmd_export(args) -> int:
    config = _load_service_config(args)
    corpus = CorpusStore(config.corpus_dir).load()
    try:
        rows = export_csv(corpus, args.out)
    except OSError as exc:
        return _fail(f"cannot write {args.out}: {exc}")
    print(f"wrote {rows} rows to {args.out}")
    return 0


def _print_group_stats(stats: analytics.GroupStats) -> None:
    print(f"== {stats.year}{stats.group}: {stats.comment_total} comments, {stats.label_total} labels")
    for category in TAXONOMY:
        count = stats.label_counts.get(category.slug, 0)
        share = stats.percentages.get(category.slug, 0.0)
        print(f"{category.slug:<22}{count:>6}{share:>9.1%}")


def cmd_stats(args) -> int:
    config = _load_service_config(args)
    corpus = CorpusStore(config.corpus_dir).load()
    if args.year is not None and args.group is not None:
        _print_group_stats(analytics.compute_stats(corpus, args.year, args.group))
    else:
        selected = [
            s
            for s in analytics.all_group_stats(corpus)
            if (args.year is None or s.year == args.year)
            and (args.group is None or s.group == args.group)
        ]
        for stats in selected:
            _print_group_stats(stats)
            print()
        totals = analytics.yearly_comment_totals(corpus)
        if totals:
            print("yearly totals: " + ", ".join(f"{y}: {n}" for y, n in totals.items()))
    if args.svg:
        from .charts import render_share_chart

        render_share_chart(corpus, args.svg)
        print(f"chart written to {args.svg}")
    return 0


def cmd_label(args) -> int:
    config = _load_service_config(args)
    slugs = [s.strip() for s in args.slugs.split(",") if s.strip()]
    if not slugs:
        return _fail("empty label set")
    for slug in slugs:
        if not is_category(slug):
            return _fail(f"unknown label: {slug!r} (valid: {', '.join(CATEGORY_SLUGS)})")
    store = CorpusStore(config.corpus_dir)
    try:
        assignment = store.assign(args.comment_id, slugs, f"human:{args.by}")
    except KeyError:
        return _fail(f"unknown comment id: {args.comment_id}")
    print(f"{args.comment_id}: {';'.join(taxonomy_sorted(assignment.labels))} by {assignment.labeler}")
    return 0


def cmd_train(args) -> int:
    config = _load_service_config(args)
    corpus = CorpusStore(config.corpus_dir).load()
    try:
        model = classifier.train(corpus, version=args.version)
    except ValueError as exc:
        return _fail(str(exc))
    out = args.out or config.model_path
    classifier.save_model(model, out)
    print(f"trained {model.version} on {len(corpus)} comments, vocabulary {len(model.vocabulary)}; saved to {out}")
    return 0


def cmd_suggest(args) -> int:
    config = _load_service_config(args)
    model_path = args.model or config.model_path
    if not os.path.exists(model_path):
        return _fail(f"no model: train one first (expected {model_path})")
    model = classifier.load_model(model_path)
    corpus = CorpusStore(config.corpus_dir).load()
    comment = corpus.comments.get(args.comment_id)
    if comment is None:
        return _fail(f"unknown comment id: {args.comment_id}")
    labels, scores = classifier.predict_text(model, comment.body)
    for slug in CATEGORY_SLUGS:
        mark = "*" if slug in labels else " "
        print(f"{mark} {slug:<22}{scores[slug]:>8.3f}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = _load_service_config(args)
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


def cmd_seed_demo(args) -> int:
    project_id, repo, pr_number = fixtures.seed_demo_fixtures(args.out)
    print(f"fixture tree at {args.out}: project {project_id}, repo {repo}, PR {pr_number}")
    return 0


_COMMANDS = {
    "sync": cmd_sync,
    "export": cmd_export,
    "stats": cmd_stats,
    "label": cmd_label,
    "train": cmd_train,
    "suggest": cmd_suggest,
    "serve": cmd_serve,
    "seed-demo": cmd_seed_demo,
}


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ValueError as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
