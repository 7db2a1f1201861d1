"""Matplotlib figure rendering for the report path.

These helpers draw interval charts from the same data that goes into the
plot CSVs and save them as PNG files next to the delimited output. They are
the only place in the package that touches a plotting backend.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from claimbands.core import PredictionInterval
from claimbands.harness.experiment import Report

__all__ = ["render_intervals", "render_comparison"]


def render_intervals(
    intervals: "list[PredictionInterval]",
    truths: np.ndarray,
    path: "str | Path",
    title: str | None = None,
    max_units: int = 50,
) -> Path:
    """Draw vertical prediction intervals with observed values as dots.

    Shows the first ``max_units`` test units, in order: a vertical bar per
    unit from lo to hi, a tick at the center prediction, and a black dot at
    the observed severity. Saves a PNG and returns its path.
    """
    path = Path(path)
    truths = np.asarray(truths, dtype=np.float64)
    take = min(int(max_units), len(intervals))
    if take < 1:
        raise ValueError("need at least one interval to draw")
    ivs = intervals[:take]
    x = np.arange(1, take + 1)
    lo = np.array([iv.lo for iv in ivs])
    hi = np.array([iv.hi for iv in ivs])
    centers = np.array([iv.center for iv in ivs])

    fig, ax = plt.subplots(figsize=(max(6.0, take * 0.18), 4.2))
    ax.vlines(x, lo, hi, color="tab:blue", lw=2.2, alpha=0.75, label="prediction interval")
    ax.plot(x, centers, linestyle="none", marker="_", color="tab:blue", markersize=9)
    ax.plot(x, truths[:take], linestyle="none", marker="o", color="black",
            markersize=3.5, label="observed severity")
    ax.set_xlabel("test unit")
    ax.set_ylabel("severity")
    if title:
        ax.set_title(title)
    ax.legend(loc="upper right", frameon=False, fontsize=8)
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_comparison(report: Report, path: "str | Path") -> Path:
    """Bar chart of average interval width per method, coverage annotated."""
    path = Path(path)
    if not report.rows:
        raise ValueError("report has no rows to draw")
    labels = [r.label for r in report.rows]
    widths = [r.avg_width for r in report.rows]
    coverages = [r.coverage for r in report.rows]

    fig, ax = plt.subplots(figsize=(max(5.0, len(labels) * 1.6), 4.0))
    bars = ax.bar(labels, widths, color="tab:blue", alpha=0.8)
    for bar, cov in zip(bars, coverages):
        ax.annotate(
            f"cov {cov:.1%}",
            xy=(bar.get_x() + bar.get_width() / 2, bar.get_height()),
            xytext=(0, 3),
            textcoords="offset points",
            ha="center",
            fontsize=8,
        )
    ax.set_ylabel("average interval width")
    ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
