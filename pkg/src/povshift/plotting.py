"""Figures written next to the CSV reports of the CLI.

Only the report commands import this module; the library core never
touches matplotlib.  Output is byte-stable: the Agg backend is used and the
PNG metadata carries no software version or timestamp.
"""

from __future__ import annotations

from collections import Counter
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_STYLE = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 100,
    "savefig.dpi": 100,
    "svg.hashsalt": "povshift",
}
_METADATA = {"Software": None}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    fig.savefig(path, format="png", metadata=_METADATA)
    plt.close(fig)
    return path


def plot_ratings_scatter(scores: Sequence, path: str | Path, title: str = "") -> Path:
    """Naturalness against referential score, one point per sentence;
    repeated coordinates are drawn darker."""
    counts = Counter((round(s.ref, 6), round(s.nat, 6)) for s in scores)
    pts = sorted(counts.items())
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4, 4))
        if pts:
            xs = [p[0][0] for p in pts]
            ys = [p[0][1] for p in pts]
            n = [p[1] for p in pts]
            top = max(n)
            ax.scatter(xs, ys, c=[k / top for k in n], cmap="Greys", vmin=0.0, vmax=1.0,
                       edgecolors="black", linewidths=0.4, s=28)
        ax.set_xlim(-2.1, 2.1)
        ax.set_ylim(-0.1, 2.1)
        ax.set_xlabel("referential score")
        ax.set_ylabel("naturalness score")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        return _save(fig, path)


def plot_ablation(report, path: str | Path) -> Path:
    """Mean accuracy per system with the seed standard deviation."""
    rows = list(report.rows)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(1.2 + 0.9 * max(len(rows), 1), 3.2))
        xs = range(len(rows))
        ax.bar(xs, [100 * r.mean() for r in rows], yerr=[100 * r.std() for r in rows],
               color="0.6", edgecolor="black", linewidth=0.5, capsize=3)
        ax.set_xticks(list(xs))
        ax.set_xticklabels([r.label for r in rows], rotation=20, ha="right")
        ax.set_ylabel("accuracy (%)")
        ax.set_ylim(0, 100)
        fig.tight_layout()
        return _save(fig, path)


def plot_scores(labels: Sequence[str], values: Sequence[float], path: str | Path, ylabel: str = "score (%)") -> Path:
    """Bar chart of one value per system (baseline comparisons, P/R/F1)."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(1.2 + 0.9 * max(len(labels), 1), 3.2))
        xs = range(len(labels))
        ax.bar(xs, list(values), color="0.6", edgecolor="black", linewidth=0.5)
        ax.set_xticks(list(xs))
        ax.set_xticklabels(list(labels), rotation=20, ha="right")
        ax.set_ylabel(ylabel)
        fig.tight_layout()
        return _save(fig, path)
