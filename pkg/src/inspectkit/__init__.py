"""inspectkit: aggregate, publish, classify and analyze software-inspection
comments across a design tool and a code host."""

__version__ = "0.1.0"

from .taxonomy import (  # noqa: F401
    ARTIFACT_KINDS,
    CATEGORY_SLUGS,
    TAXONOMY,
    InspectionComment,
    LabelAssignment,
    validate_comment,
)
