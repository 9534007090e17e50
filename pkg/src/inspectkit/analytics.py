"""Per-year/per-group category statistics and teaching-trend flags.

Percentages use the group's total label occurrences as the denominator, so
each group's shares sum to 1 even though one comment may carry several
labels. Unlabeled comments still count toward ``comment_total`` but add
nothing to the shares.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .corpus import Corpus
from .taxonomy import CATEGORY_SLUGS, TAXONOMY

_DISPLAY = {c.slug: c.display_name for c in TAXONOMY}

ADVICE = {
    "presentation": "Many wording slips: run another spelling and phrasing pass before submitting.",
    "inconsistent": "Frequent cross-document disagreements: re-check earlier deliverables for consistency.",
    "short-description": "Descriptions keep coming up short: expand sections before requesting review.",
    "mistake": "Plain notation/description errors recur: add a peer-review step before inspection.",
}


@dataclass
class GroupStats:
    year: int
    group: str
    comment_total: int
    label_counts: dict[str, int]
    label_total: int
    percentages: dict[str, float]


@dataclass
class TrendFlag:
    year: int
    group: str
    slug: str
    threshold: float
    share: float
    message: str


def compute_stats(corpus: Corpus, year: int, group: str) -> GroupStats:
    """Count effective label occurrences for one (year, group) cell."""
    counts = {slug: 0 for slug in CATEGORY_SLUGS}
    comment_total = 0
    for cid, comment in corpus.comments.items():
        if comment.year != year or comment.group != group:
            continue
        comment_total += 1
        labels = corpus.effective_labels(cid)
        if labels:
            for slug in labels:
                counts[slug] += 1
    label_total = sum(counts.values())
    if label_total > 0:
        percentages = {slug: counts[slug] / label_total for slug in CATEGORY_SLUGS}
    else:
        percentages = {}
    return GroupStats(
        year=year,
        group=group,
        comment_total=comment_total,
        label_counts=counts,
        label_total=label_total,
        percentages=percentages,
    )


def group_keys(corpus: Corpus) -> list[tuple[int, str]]:
    """All (year, group) cells present, newest year first, groups A-Z."""
    keys = {(c.year, c.group) for c in corpus.comments.values()}
    return sorted(keys, key=lambda k: (-k[0], k[1]))


def all_group_stats(corpus: Corpus) -> list[GroupStats]:
    return [compute_stats(corpus, year, group) for year, group in group_keys(corpus)]


def yearly_comment_totals(corpus: Corpus) -> dict[int, int]:
    """Distinct comment counts per calendar year, groups merged."""
    totals: dict[int, int] = {}
    for comment in corpus.comments.values():
        totals[comment.year] = totals.get(comment.year, 0) + 1
    return dict(sorted(totals.items()))


def trend_flags(stats: GroupStats, rules: Mapping[str, float]) -> list[TrendFlag]:
    """One flag per category whose share meets its rule threshold."""
    flags: list[TrendFlag] = []
    for slug in CATEGORY_SLUGS:
        if slug not in rules:
            continue
        threshold = rules[slug]
        if not (0.0 <= threshold <= 1.0):
            raise ValueError(f"threshold for {slug} outside [0, 1]: {threshold}")
        share = stats.percentages.get(slug, 0.0)
        if share >= threshold:
            message = ADVICE.get(
                slug, f"High share of '{_DISPLAY[slug]}' comments: review this area with the team."
            )
            flags.append(
                TrendFlag(
                    year=stats.year,
                    group=stats.group,
                    slug=slug,
                    threshold=threshold,
                    share=share,
                    message=message,
                )
            )
    return flags


@dataclass
class GroupSeries:
    year: int
    group: str
    points: list[tuple[str, float]]  # (slug, share) in taxonomy order


def percentage_chart_data(corpus: Corpus) -> list[GroupSeries]:
    """Chart-ready share series, one per (year, group), taxonomy order."""
    series = []
    for stats in all_group_stats(corpus):
        points = [(slug, stats.percentages.get(slug, 0.0)) for slug in CATEGORY_SLUGS]
        series.append(GroupSeries(year=stats.year, group=stats.group, points=points))
    return series


def chart_data_json(corpus: Corpus) -> dict:
    """JSON-shaped chart payload consumed by the dashboard UI."""
    return {
        "categories": list(CATEGORY_SLUGS),
        "series": [
            {
                "year": s.year,
                "group": s.group,
                "label": f"{s.year}{s.group}",
                "points": [{"slug": slug, "percentage": share} for slug, share in s.points],
            }
            for s in percentage_chart_data(corpus)
        ],
    }
