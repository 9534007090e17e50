from __future__ import annotations

from datetime import datetime, timezone

import pytest

from inspectkit.corpus import Corpus
from inspectkit.fixtures import build_reference_corpus
from inspectkit.taxonomy import CodeHostLocation, DesignLocation, InspectionComment


@pytest.fixture(scope="session")
def reference_corpus() -> Corpus:
    return build_reference_corpus()


def make_comment(
    cid: str = "c1",
    source: str = "code-host",
    year: int = 2022,
    group: str = "G1",
    body: str = "please fix this",
    **overrides,
) -> InspectionComment:
    if source == "design-tool":
        location = overrides.pop("location", DesignLocation("p1", "f1", 10.0, 20.0))
    else:
        location = overrides.pop("location", CodeHostLocation("repo-g1", 7))
    fields = dict(
        id=cid,
        source=source,
        year=year,
        group=group,
        author_role="teaching-assistant",
        artifact="functional-spec",
        body=body,
        created_at=datetime(year, 6, 1, 10, 0, 0, tzinfo=timezone.utc),
        location=location,
    )
    fields.update(overrides)
    return InspectionComment(**fields)
