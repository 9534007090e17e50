"""Grouped bar chart of category shares, rendered to a file.

Kept separate from the pure analytics so importing those never drags in
matplotlib.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .analytics import percentage_chart_data
from .corpus import Corpus
from .taxonomy import TAXONOMY


def render_share_chart(corpus: Corpus, out_path: str | os.PathLike[str]) -> str:
    """Write the per-group category-share bar chart; returns the path.

    Output format follows the file extension (.svg, .png, .pdf, ...).
    """
    series = percentage_chart_data(corpus)
    labels = [c.display_name for c in TAXONOMY]
    x = np.arange(len(labels))

    fig, ax = plt.subplots(figsize=(13, 5))
    n = max(len(series), 1)
    width = 0.8 / n
    for i, s in enumerate(series):
        shares = [share * 100.0 for _, share in s.points]
        ax.bar(x + (i - (n - 1) / 2) * width, shares, width, label=f"{s.year}{s.group}")

    ax.set_ylabel("share of label occurrences [%]")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=40, ha="right")
    if series:
        ax.legend()
    ax.set_title("Inspection comment classification by team and year")
    fig.tight_layout()
    fig.savefig(os.fspath(out_path))
    plt.close(fig)
    return os.fspath(out_path)
