"""Figure rendering for the CLI report path.

Charts the tables produced by the report module to image files using a
headless matplotlib backend.  Kept out of the report module on purpose:
reports stay pure tabular data, figures are a presentation concern of
the command-line layer.
"""

from pathlib import Path
from typing import Iterable

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  backend must be pinned first

from .report import Breakdown, MitigationRank, OtSharesReport, display_percent

_BAR_COLOR = "#4878a8"
_SECONDARY_COLOR = "#b0b0b0"


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def render_breakdown_figure(breakdown: Breakdown, path: str | Path, title: str = "") -> Path:
    """Horizontal bar chart of a breakdown, labeled with display percents."""
    labels = [row.label for row in breakdown.rows]
    counts = [row.count for row in breakdown.rows]
    fig, ax = plt.subplots(figsize=(7, 0.6 * len(labels) + 1.5))
    positions = range(len(labels))
    ax.barh(list(positions), counts, color=_BAR_COLOR)
    ax.set_yticks(list(positions))
    ax.set_yticklabels(labels)
    ax.invert_yaxis()
    ax.set_xlabel(f"entries (n={breakdown.total})")
    ax.set_title(title or breakdown.name)
    for pos, row in zip(positions, breakdown.rows):
        ax.text(row.count, pos, f" {display_percent(row.share)}%", va="center")
    return _save(fig, path)


def render_top_mitigations_figure(
    rows: Iterable[MitigationRank], path: str | Path, title: str = "Top mitigations"
) -> Path:
    """Stacked bars of High/Medium/Low candidate counts per mitigation."""
    rows = list(rows)
    ids = [row.mitigation_id for row in rows]
    high = [row.high for row in rows]
    medium = [row.medium for row in rows]
    low = [row.low for row in rows]
    fig, ax = plt.subplots(figsize=(8, 0.45 * max(len(ids), 1) + 1.5))
    positions = range(len(ids))
    ax.barh(list(positions), high, color="#2d7a2d", label="high")
    ax.barh(list(positions), medium, left=high, color="#d8a13a", label="medium")
    left_low = [h + m for h, m in zip(high, medium)]
    ax.barh(list(positions), low, left=left_low, color="#b04a4a", label="low")
    ax.set_yticks(list(positions))
    ax.set_yticklabels(ids)
    ax.invert_yaxis()
    ax.set_xlabel("mitigation candidates")
    ax.set_title(title)
    ax.legend(loc="lower right")
    return _save(fig, path)


def render_ot_shares_figure(report: OtSharesReport, path: str | Path) -> Path:
    """Side-by-side panels: OT plausibility and interaction requirement."""
    fig, (left, right) = plt.subplots(1, 2, figsize=(10, 4))
    plausible = report.plausible
    left.bar(
        [row.label for row in plausible.rows],
        [row.count for row in plausible.rows],
        color=[_BAR_COLOR, _SECONDARY_COLOR][: len(plausible.rows)],
    )
    left.set_title(f"OT plausibility (n={plausible.total})")
    for i, row in enumerate(plausible.rows):
        left.text(i, row.count, f"{display_percent(row.share)}%", ha="center", va="bottom")

    interaction = report.interaction_ot
    if interaction is None:
        right.text(0.5, 0.5, "no OT-plausible entries", ha="center", va="center")
        right.set_axis_off()
    else:
        right.bar(
            [row.label for row in interaction.rows],
            [row.count for row in interaction.rows],
            color=_BAR_COLOR,
        )
        right.set_title(f"User interaction, OT subset (n={interaction.total})")
        for i, row in enumerate(interaction.rows):
            right.text(i, row.count, f"{display_percent(row.share)}%", ha="center", va="bottom")
    fig.tight_layout()
    return _save(fig, path)
