from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from inspectkit.analytics import (
    TrendFlag,
    all_group_stats,
    chart_data_json,
    compute_stats,
    group_keys,
    percentage_chart_data,
    trend_flags,
    yearly_comment_totals,
)
from inspectkit.corpus import Corpus
from inspectkit.taxonomy import CATEGORY_SLUGS

from conftest import make_comment

# Published three-year classification counts, frozen independently of the
# fixtures module: the sums below are the oracle for every derived value.
ROW_2022G1 = [50, 13, 22, 6, 3, 10, 24, 22, 1, 2, 57, 53, 6]
ROW_2021G1 = [3, 2, 8, 6, 0, 8, 22, 18, 2, 0, 21, 33, 0]
ROW_2020G1 = [14, 0, 8, 8, 0, 11, 21, 13, 2, 1, 11, 19, 2]
ROW_2020G2 = [14, 1, 2, 3, 2, 6, 12, 6, 0, 0, 12, 27, 0]
ROWS = {
    (2022, "G1"): ROW_2022G1,
    (2021, "G1"): ROW_2021G1,
    (2020, "G1"): ROW_2020G1,
    (2020, "G2"): ROW_2020G2,
}


class TestComputeStats:
    def test_reference_counts_exact(self, reference_corpus):
        for (year, group), row in ROWS.items():
            stats = compute_stats(reference_corpus, year, group)
            assert stats.label_counts == dict(zip(CATEGORY_SLUGS, row)), (year, group)

    def test_2022_label_total_and_presentation_share(self, reference_corpus):
        stats = compute_stats(reference_corpus, 2022, "G1")
        expected_total = sum(ROW_2022G1)
        assert expected_total == 269
        assert stats.label_total == expected_total
        assert stats.percentages["presentation"] == pytest.approx(57 / 269)

    def test_multi_label_consistency(self, reference_corpus):
        stats = compute_stats(reference_corpus, 2022, "G1")
        assert stats.comment_total == 264
        assert stats.label_total >= stats.comment_total

    def test_empty_corpus(self):
        stats = compute_stats(Corpus(), 2022, "G1")
        assert stats.comment_total == 0
        assert stats.label_total == 0
        assert all(v == 0 for v in stats.label_counts.values())
        assert stats.percentages == {}

    def test_percentages_sum_to_one(self, reference_corpus):
        for year, group in ROWS:
            stats = compute_stats(reference_corpus, year, group)
            assert sum(stats.percentages.values()) == pytest.approx(1.0, abs=1e-9)

    def test_unlabeled_comments_counted_but_shareless(self):
        corpus = Corpus()
        corpus.comments["a"] = make_comment(cid="a")
        corpus.comments["b"] = make_comment(cid="b")
        corpus.assign("a", {"mistake"}, "human:x")
        stats = compute_stats(corpus, 2022, "G1")
        assert stats.comment_total == 2
        assert stats.label_total == 1
        assert stats.percentages["mistake"] == 1.0

    def test_label_counts_sum_equals_label_total(self, reference_corpus):
        for year, group in ROWS:
            stats = compute_stats(reference_corpus, year, group)
            assert sum(stats.label_counts.values()) == stats.label_total


class TestYearlyTotals:
    def test_three_year_totals(self, reference_corpus):
        assert yearly_comment_totals(reference_corpus) == {2022: 264, 2021: 117, 2020: 171}

    def test_single_year_restriction(self, reference_corpus):
        trimmed = Corpus()
        for cid, c in reference_corpus.comments.items():
            if c.year == 2020:
                trimmed.comments[cid] = c
        assert yearly_comment_totals(trimmed) == {2020: 171}

    def test_empty(self):
        assert yearly_comment_totals(Corpus()) == {}


class TestTrendFlags:
    def test_presentation_flag_raised_at_015(self, reference_corpus):
        stats = compute_stats(reference_corpus, 2022, "G1")
        flags = trend_flags(stats, {"presentation": 0.15})
        assert len(flags) == 1
        flag = flags[0]
        assert isinstance(flag, TrendFlag)
        assert flag.slug == "presentation"
        assert flag.share == pytest.approx(57 / 269)
        assert "spelling" in flag.message

    def test_no_flag_above_share(self, reference_corpus):
        stats = compute_stats(reference_corpus, 2022, "G1")
        assert trend_flags(stats, {"presentation": 0.5}) == []

    def test_inconsistent_message_mentions_earlier_documents(self, reference_corpus):
        stats = compute_stats(reference_corpus, 2022, "G1")
        flags = trend_flags(stats, {"inconsistent": 0.0})
        assert len(flags) == 1
        assert "earlier" in flags[0].message or "past" in flags[0].message

    def test_empty_stats_no_flags(self):
        stats = compute_stats(Corpus(), 2022, "G1")
        assert trend_flags(stats, {"presentation": 0.15}) == []

    def test_threshold_out_of_range(self, reference_corpus):
        stats = compute_stats(reference_corpus, 2022, "G1")
        with pytest.raises(ValueError):
            trend_flags(stats, {"presentation": 1.5})


class TestChartData:
    def test_four_series_in_order(self, reference_corpus):
        series = percentage_chart_data(reference_corpus)
        assert [(s.year, s.group) for s in series] == [
            (2022, "G1"),
            (2021, "G1"),
            (2020, "G1"),
            (2020, "G2"),
        ]
        for s in series:
            assert [slug for slug, _ in s.points] == list(CATEGORY_SLUGS)

    def test_2021_enhancement_request_share(self, reference_corpus):
        series = {(s.year, s.group): s for s in percentage_chart_data(reference_corpus)}
        points = dict(series[(2021, "G1")].points)
        assert sum(ROW_2021G1) == 123
        assert points["enhancement-request"] == pytest.approx(33 / 123)

    def test_single_comment_corpus(self):
        corpus = Corpus()
        corpus.comments["a"] = make_comment(cid="a")
        corpus.assign("a", {"rationale"}, "human:x")
        series = percentage_chart_data(corpus)
        assert len(series) == 1
        points = dict(series[0].points)
        assert points["rationale"] == 1.0
        assert all(v == 0.0 for slug, v in points.items() if slug != "rationale")

    def test_json_shape(self, reference_corpus):
        payload = chart_data_json(reference_corpus)
        assert payload["categories"] == list(CATEGORY_SLUGS)
        assert len(payload["series"]) == 4
        first = payload["series"][0]
        assert first["label"] == "2022G1"
        assert len(first["points"]) == 13


# -- properties --------------------------------------------------------------

_mini_corpus = st.lists(
    st.tuples(
        st.sampled_from([2020, 2021]),
        st.sampled_from(["G1", "G2"]),
        st.sets(st.sampled_from(CATEGORY_SLUGS[:6]), min_size=1, max_size=3),
    ),
    min_size=0,
    max_size=12,
)


def _build(rows, prefix=""):
    corpus = Corpus()
    for i, (year, group, labels) in enumerate(rows):
        cid = f"{prefix}c{i:03d}"
        corpus.comments[cid] = make_comment(cid=cid, year=year, group=group)
        corpus.assign(cid, labels, "human:p")
    return corpus


@given(_mini_corpus)
def test_permutation_invariance(rows):
    forward = _build(rows)
    backward = _build(list(reversed(rows)), prefix="r")
    for year in (2020, 2021):
        for group in ("G1", "G2"):
            a = compute_stats(forward, year, group)
            b = compute_stats(backward, year, group)
            assert a.label_counts == b.label_counts
            assert a.comment_total == b.comment_total


@given(_mini_corpus, _mini_corpus)
def test_disjoint_merge_adds_counts_slugwise(rows_a, rows_b):
    a = _build(rows_a, prefix="a")
    b = _build(rows_b, prefix="b")
    merged = Corpus()
    merged.comments.update(a.comments)
    merged.comments.update(b.comments)
    merged.assignments = a.assignments + b.assignments
    for year in (2020, 2021):
        for group in ("G1", "G2"):
            sa = compute_stats(a, year, group)
            sb = compute_stats(b, year, group)
            sm = compute_stats(merged, year, group)
            for slug in CATEGORY_SLUGS:
                assert sm.label_counts[slug] == sa.label_counts[slug] + sb.label_counts[slug]


@given(
    st.lists(
        st.tuples(st.sampled_from(["G1", "G2"]), st.sampled_from(CATEGORY_SLUGS)),
        min_size=0,
        max_size=15,
    )
)
def test_single_label_corpus_totals_match(rows):
    # brute-force oracle: with exactly one label per comment,
    # label_total == comment_total per group
    corpus = Corpus()
    per_group_count: dict[str, int] = {}
    for i, (group, slug) in enumerate(rows):
        cid = f"c{i:03d}"
        corpus.comments[cid] = make_comment(cid=cid, year=2021, group=group)
        corpus.assign(cid, {slug}, "human:p")
        per_group_count[group] = per_group_count.get(group, 0) + 1
    for group in ("G1", "G2"):
        stats = compute_stats(corpus, 2021, group)
        assert stats.label_total == stats.comment_total == per_group_count.get(group, 0)


def test_group_keys_ordering(reference_corpus):
    assert group_keys(reference_corpus) == [(2022, "G1"), (2021, "G1"), (2020, "G1"), (2020, "G2")]


def test_all_group_stats(reference_corpus):
    stats = all_group_stats(reference_corpus)
    assert len(stats) == 4
    assert stats[0].year == 2022
