"""
Report writers: summary JSON, subgroup CSV tables and SVG bar charts.

Numbers in reports are percentages rounded half away from zero to two
decimals. Writers produce byte-identical files for identical inputs.
"""

from __future__ import annotations

import json
import logging
import os
from collections.abc import Mapping, Sequence
from pathlib import Path
from typing import Any

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from lesionbench.evaluation import SummaryRow, round_half_away  # noqa: E402

logger = logging.getLogger(__name__)

SUBGROUP_COLUMNS = ("group", "n", "mean_dice_pct", "mean_nsd_pct")

# Fixed salt and no timestamp keep SVG output reproducible
_SVG_RC = {"svg.hashsalt": "lesionbench", "svg.fonttype": "none"}
_SVG_METADATA = {"Date": None, "Creator": None}


def _display(value: float | None) -> float | None:
    return None if value is None else round_half_away(value, 2)


def row_to_dict(row: SummaryRow) -> dict[str, Any]:
    """SummaryRow with display-rounded means (None for empty groups)."""
    return {
        "group": row.group,
        "n": row.n_included,
        "mean_dice_pct": _display(row.mean_dice_pct),
        "mean_nsd_pct": _display(row.mean_nsd_pct),
    }


def write_text_atomic(path: str | Path, text: str) -> None:
    """Write UTF-8 text through a sibling temp file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_name(f".tmp-{os.getpid()}-{path.name}")
    try:
        tmp_path.write_text(text, encoding="utf-8")
        os.replace(tmp_path, path)
    finally:
        tmp_path.unlink(missing_ok=True)


def write_json(payload: Mapping[str, Any], path: str | Path) -> None:
    write_text_atomic(path, json.dumps(payload, indent=2, allow_nan=False) + "\n")


def summary_payload(
    *,
    version: str,
    tolerance_mm: float,
    policy: str,
    summaries: Mapping[str, SummaryRow],
    n_cases: int,
    precision: str | None = None,
    preprocessing_order: str | None = None,
    by_sex: Mapping[str, Sequence[SummaryRow]] | None = None,
) -> dict[str, Any]:
    """
    Assemble the summary JSON document.

    Args:
        version: Toolkit version that produced the numbers
        tolerance_mm: NSD tolerance
        policy: Headline aggregation policy
        summaries: Overall row per policy name
        n_cases: Number of evaluated cases
        precision: Ensemble precision of the scored predictions, if known
        preprocessing_order: Preprocessing order tag of the inputs, if known
        by_sex: All/male/female rows per policy name (when metadata was given)
    """
    payload: dict[str, Any] = {
        "toolkit": "lesionbench",
        "version": version,
        "tolerance_mm": tolerance_mm,
        "policy": policy,
        "precision": precision,
        "preprocessing_order": preprocessing_order,
        "n_cases": n_cases,
        "rows": [row_to_dict(summaries[policy])],
        "policies": {name: row_to_dict(row) for name, row in sorted(summaries.items())},
    }
    if by_sex is not None:
        payload["by_sex"] = {
            name: [row_to_dict(r) for r in rows] for name, rows in sorted(by_sex.items())
        }
    return payload


def _cell(value: float | None) -> str:
    return "" if value is None else f"{round_half_away(value, 2):.2f}"


def subgroup_frame(rows: Sequence[SummaryRow]) -> pd.DataFrame:
    """Subgroup rows as display strings; empty groups have blank means."""
    return pd.DataFrame(
        [
            {
                "group": r.group,
                "n": r.n_included,
                "mean_dice_pct": _cell(r.mean_dice_pct),
                "mean_nsd_pct": _cell(r.mean_nsd_pct),
            }
            for r in rows
        ],
        columns=list(SUBGROUP_COLUMNS),
    )


def write_subgroup_csv(rows: Sequence[SummaryRow], path: str | Path) -> None:
    write_text_atomic(path, subgroup_frame(rows).to_csv(index=False, lineterminator="\n"))


def write_subgroup_svg(rows: Sequence[SummaryRow], axis: str, path: str | Path) -> None:
    """
    Two-panel bar chart: cases per group (left) and mean Dice per group (right).

    Groups without included cases get an empty bar in the Dice panel.
    """
    labels = [r.group for r in rows]
    counts = [r.n_included for r in rows]
    dices = [r.mean_dice_pct if r.mean_dice_pct is not None else 0.0 for r in rows]
    positions = range(len(rows))

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context(_SVG_RC):
        fig, (count_ax, dice_ax) = plt.subplots(1, 2, figsize=(max(8, 1.2 * len(rows)), 4))
        try:
            count_ax.bar(positions, counts, color="#4c72b0")
            count_ax.set_title(f"Cases per {axis} group")
            count_ax.set_ylabel("n")

            dice_ax.bar(positions, dices, color="#55a868")
            dice_ax.set_title(f"Mean Dice by {axis} group")
            dice_ax.set_ylabel("Dice (%)")
            dice_ax.set_ylim(0, 100)

            for ax in (count_ax, dice_ax):
                ax.set_xticks(list(positions))
                ax.set_xticklabels(labels, rotation=45, ha="right")
            fig.tight_layout()
            fig.savefig(path, format="svg", metadata=_SVG_METADATA)
        finally:
            plt.close(fig)
    logger.debug("wrote %s", path)
