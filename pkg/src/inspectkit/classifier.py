"""Category suggestion for inspection comments.

Two engines share the taxonomy: a keyword-rule baseline driven by an
editable config file, and a trainable one-vs-rest Bayesian text model
(one binary sub-model per category, add-one smoothing over token counts).
Both are deterministic: same inputs, same outputs, parameter for
parameter. The Bayesian model is desk-scale on purpose; there is no
external ML service behind it.

Tokenization handles unsegmented Japanese by emitting character bigrams
for runs of CJK codepoints next to plain lowercase word tokens.
"""

from __future__ import annotations

import json
import math
import random
import re
import sys
from dataclasses import dataclass
from importlib import resources
from typing import Iterable, Mapping, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .corpus import Corpus
from .taxonomy import (
    CATEGORY_SLUGS,
    InspectionComment,
    LabelAssignment,
    RULE_BASELINE_LABELER,
    is_category,
    make_assignment,
)

FALLBACK_SLUG = "enhancement-request"
DEFAULT_THRESHOLD = 0.5

_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)

# Hiragana, katakana, CJK ideograph blocks (unified + ext A + compat).
_CJK_RANGES = (
    (0x3040, 0x30FF),
    (0x3400, 0x4DBF),
    (0x4E00, 0x9FFF),
    (0xF900, 0xFAFF),
)


def _is_cjk(ch: str) -> bool:
    code = ord(ch)
    return any(lo <= code <= hi for lo, hi in _CJK_RANGES)


def tokenize(text: str) -> dict[str, int]:
    """Token counts: lowercase word runs, CJK runs as character bigrams."""
    if not text.strip():
        raise ValueError("empty text")
    counts: dict[str, int] = {}

    def add(token: str) -> None:
        counts[token] = counts.get(token, 0) + 1

    for run in _WORD_RE.findall(text.lower()):
        start = 0
        for i in range(1, len(run) + 1):
            if i == len(run) or _is_cjk(run[i]) != _is_cjk(run[start]):
                segment = run[start:i]
                if _is_cjk(segment[0]):
                    if len(segment) == 1:
                        add(segment)
                    else:
                        for j in range(len(segment) - 1):
                            add(segment[j : j + 2])
                else:
                    add(segment)
                start = i
    return counts


# -- keyword baseline -------------------------------------------------------


def load_keyword_rules(path: Optional[str] = None) -> dict[str, list[str]]:
    """Keyword lists per category slug, from ``path`` or the packaged
    default config. Keywords are matched as lowercase substrings."""
    if path is None:
        raw = resources.files("inspectkit").joinpath("data/keywords.toml").read_text("utf-8")
    else:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    data = tomllib.loads(raw)
    rules: dict[str, list[str]] = {}
    for slug, keywords in data.items():
        if not is_category(slug):
            raise ValueError(f"keyword config names unknown category: {slug!r}")
        if not isinstance(keywords, list) or not all(isinstance(k, str) and k for k in keywords):
            raise ValueError(f"keyword list for {slug} must be non-empty strings")
        rules[slug] = [k.lower() for k in keywords]
    return rules


def rule_baseline(
    comment: InspectionComment,
    rules: Optional[Mapping[str, list[str]]] = None,
    assigned_at=None,
) -> LabelAssignment:
    """Keyword-table classification; falls back to the most common
    category when nothing matches, so the result is never empty."""
    if rules is None:
        rules = load_keyword_rules()
    body = comment.body.lower()
    matched = {slug for slug, keywords in rules.items() if any(kw in body for kw in keywords)}
    if not matched:
        matched = {FALLBACK_SLUG}
    return make_assignment(comment.id, matched, RULE_BASELINE_LABELER, assigned_at=assigned_at)


# -- one-vs-rest Bayesian model ----------------------------------------------


@dataclass
class CategorySubModel:
    log_prior_pos: float
    log_prior_neg: float
    token_log_pos: dict[str, float]
    token_log_neg: dict[str, float]
    degenerate: bool = False


@dataclass
class MultiLabelModel:
    version: str
    threshold: float
    vocabulary: frozenset[str]
    per_category: dict[str, CategorySubModel]


Document = tuple[Mapping[str, int], frozenset]


def fit_documents(
    docs: list[Document], version: str = "v1", threshold: float = DEFAULT_THRESHOLD
) -> MultiLabelModel:
    """Fit all 13 binary sub-models over pre-tokenized documents.

    Counting is commutative, so document order never changes parameters.
    A category with zero positive examples gets a degenerate sub-model
    that always scores 0.
    """
    if not docs:
        raise ValueError("empty corpus: nothing to train on")
    vocabulary = frozenset(t for tv, _ in docs for t in tv)
    n = len(docs)
    per_category: dict[str, CategorySubModel] = {}

    for slug in CATEGORY_SLUGS:
        pos = [tv for tv, labels in docs if slug in labels]
        n_pos = len(pos)
        if n_pos == 0:
            per_category[slug] = CategorySubModel(0.0, 0.0, {}, {}, degenerate=True)
            continue
        neg = [tv for tv, labels in docs if slug not in labels]

        def side(token_vectors: list[Mapping[str, int]]) -> dict[str, float]:
            totals: dict[str, int] = {}
            for tv in token_vectors:
                for token, count in tv.items():
                    totals[token] = totals.get(token, 0) + count
            denom = sum(totals.values()) + len(vocabulary)  # add-one smoothing
            return {t: math.log((totals.get(t, 0) + 1) / denom) for t in vocabulary}

        per_category[slug] = CategorySubModel(
            log_prior_pos=math.log((n_pos + 1) / (n + 2)),
            log_prior_neg=math.log((n - n_pos + 1) / (n + 2)),
            token_log_pos=side(pos),
            token_log_neg=side(neg),
        )
    return MultiLabelModel(
        version=version,
        threshold=threshold,
        vocabulary=vocabulary,
        per_category=per_category,
    )


def train(corpus: Corpus, version: str = "v1", threshold: float = DEFAULT_THRESHOLD) -> MultiLabelModel:
    """Train from a corpus's effective labels (any labeler counts)."""
    docs: list[Document] = []
    for cid in sorted(corpus.comments):
        labels = corpus.effective_labels(cid)
        if labels:
            docs.append((tokenize(corpus.comments[cid].body), labels))
    if not docs:
        raise ValueError("empty corpus: no labeled comments")
    if len(docs) < 2:
        raise ValueError("need at least 2 labeled comments to train")
    return fit_documents(docs, version=version, threshold=threshold)


def _posterior(sub: CategorySubModel, tokens: Mapping[str, int]) -> float:
    if sub.degenerate:
        return 0.0
    lp = sub.log_prior_pos
    ln = sub.log_prior_neg
    for token, count in tokens.items():
        log_pos = sub.token_log_pos.get(token)
        if log_pos is None:
            continue  # out-of-vocabulary tokens carry no evidence
        lp += count * log_pos
        ln += count * sub.token_log_neg[token]
    d = ln - lp
    if d > 700.0:
        return 0.0
    if d < -700.0:
        return 1.0
    return 1.0 / (1.0 + math.exp(d))


def score_tokens(model: MultiLabelModel, tokens: Mapping[str, int]) -> dict[str, float]:
    return {slug: _posterior(model.per_category[slug], tokens) for slug in CATEGORY_SLUGS}


def decide(model: MultiLabelModel, scores: Mapping[str, float]) -> set[str]:
    """The decision rule: every category at or above the threshold; if none
    qualifies, the best-scoring non-degenerate category (ties broken by
    taxonomy order). Never empty, and a category with zero training
    positives is never emitted."""
    labels = {slug for slug, p in scores.items() if p >= model.threshold}
    if not labels:
        best = None
        for slug in CATEGORY_SLUGS:
            if model.per_category[slug].degenerate:
                continue
            if best is None or scores[slug] > scores[best]:
                best = slug
        labels = {best if best is not None else CATEGORY_SLUGS[0]}
    return labels


def predict_text(model: MultiLabelModel, text: str) -> tuple[set[str], dict[str, float]]:
    scores = score_tokens(model, tokenize(text))
    return decide(model, scores), scores


def predict(model: MultiLabelModel, comment: InspectionComment, assigned_at=None) -> LabelAssignment:
    labels, scores = predict_text(model, comment.body)
    return make_assignment(
        comment.id,
        labels,
        f"ml-model:{model.version}",
        scores=scores,
        assigned_at=assigned_at,
    )


# -- serialization ------------------------------------------------------------

MODEL_FORMAT = "inspectkit-nb/1"


def model_to_dict(model: MultiLabelModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": model.version,
        "threshold": model.threshold,
        "vocabulary": sorted(model.vocabulary),
        "categories": {
            slug: {
                "degenerate": sub.degenerate,
                "log_prior_pos": sub.log_prior_pos,
                "log_prior_neg": sub.log_prior_neg,
                "token_log_pos": sub.token_log_pos,
                "token_log_neg": sub.token_log_neg,
            }
            for slug, sub in model.per_category.items()
        },
    }


def model_from_dict(payload: dict) -> MultiLabelModel:
    if payload.get("format") != MODEL_FORMAT:
        raise ValueError(f"unsupported model format: {payload.get('format')!r}")
    per_category = {
        slug: CategorySubModel(
            log_prior_pos=entry["log_prior_pos"],
            log_prior_neg=entry["log_prior_neg"],
            token_log_pos=entry["token_log_pos"],
            token_log_neg=entry["token_log_neg"],
            degenerate=entry["degenerate"],
        )
        for slug, entry in payload["categories"].items()
    }
    return MultiLabelModel(
        version=payload["version"],
        threshold=payload["threshold"],
        vocabulary=frozenset(payload["vocabulary"]),
        per_category=per_category,
    )


def save_model(model: MultiLabelModel, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, ensure_ascii=False)


def load_model(path: str) -> MultiLabelModel:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


# -- evaluation ---------------------------------------------------------------


@dataclass
class CategoryMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvaluationReport:
    k: int
    per_category: dict[str, Optional[CategoryMetrics]]
    macro_f1: float


def _make_folds(docs: list[Document], k: int, seed: int) -> list[list[int]]:
    """Stratified-as-possible: docs sharing a label set are spread across
    folds round-robin, shuffled within each stratum by a fixed seed."""
    by_labelset: dict[tuple, list[int]] = {}
    for i, (_, labels) in enumerate(docs):
        by_labelset.setdefault(tuple(sorted(labels)), []).append(i)
    rng = random.Random(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    position = 0
    for key in sorted(by_labelset):
        indices = by_labelset[key]
        rng.shuffle(indices)
        for i in indices:
            folds[position % k].append(i)
            position += 1
    return folds


def evaluate(corpus: Corpus, k: int, seed: int = 0) -> EvaluationReport:
    """K-fold cross-validation of the Bayesian model on a labeled corpus.

    Per-category precision/recall/F1 aggregate true/false positives across
    all test folds; categories never appearing as truth in any test fold
    are reported as None and excluded from the macro average.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    docs: list[Document] = []
    for cid in sorted(corpus.comments):
        labels = corpus.effective_labels(cid)
        if labels:
            docs.append((tokenize(corpus.comments[cid].body), labels))
    if len(docs) < k:
        raise ValueError(f"corpus too small: {len(docs)} labeled comments for k={k}")

    folds = _make_folds(docs, k, seed)
    tp = {slug: 0 for slug in CATEGORY_SLUGS}
    fp = {slug: 0 for slug in CATEGORY_SLUGS}
    fn = {slug: 0 for slug in CATEGORY_SLUGS}

    for fold in folds:
        test = set(fold)
        train_docs = [doc for i, doc in enumerate(docs) if i not in test]
        if not train_docs:
            continue
        model = fit_documents(train_docs)
        for i in fold:
            tokens, truth = docs[i]
            predicted = decide(model, score_tokens(model, tokens))
            for slug in CATEGORY_SLUGS:
                if slug in predicted and slug in truth:
                    tp[slug] += 1
                elif slug in predicted:
                    fp[slug] += 1
                elif slug in truth:
                    fn[slug] += 1

    per_category: dict[str, Optional[CategoryMetrics]] = {}
    f1_values: list[float] = []
    for slug in CATEGORY_SLUGS:
        support = tp[slug] + fn[slug]
        if support == 0:
            per_category[slug] = None
            continue
        precision = tp[slug] / (tp[slug] + fp[slug]) if tp[slug] + fp[slug] > 0 else 0.0
        recall = tp[slug] / support
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        per_category[slug] = CategoryMetrics(precision=precision, recall=recall, f1=f1, support=support)
        f1_values.append(f1)
    macro_f1 = sum(f1_values) / len(f1_values) if f1_values else 0.0
    return EvaluationReport(k=k, per_category=per_category, macro_f1=macro_f1)
