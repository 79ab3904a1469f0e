"""
Console rendering of summaries and schedules.

Displays report rows and schedule tables with Rich.
"""

from __future__ import annotations

from collections.abc import Sequence

from rich.console import Console
from rich.table import Table

from lesionbench.evaluation import SummaryRow, round_half_away
from lesionbench.schedules import LrSchedule, SamplingPlan


def _pct(value: float | None) -> str:
    return "[dim]n/a[/dim]" if value is None else f"{round_half_away(value, 2):.2f}"


def summary_table(rows: Sequence[SummaryRow], title: str) -> Table:
    """Rich table of group, n, Dice and NSD."""
    table = Table(title=title, title_justify="left")
    table.add_column("Group")
    table.add_column("n", justify="right")
    table.add_column("Dice", justify="right")
    table.add_column("NSD", justify="right")
    for row in rows:
        table.add_row(row.group, str(row.n_included), _pct(row.mean_dice_pct), _pct(row.mean_nsd_pct))
    return table


def show_summaries(
    summaries: dict[str, Sequence[SummaryRow]], console: Console | None = None
) -> None:
    """
    Print one table per aggregation policy.

    Args:
        summaries: Rows keyed by policy name
        console: Rich console to use (creates new if None)
    """
    if console is None:
        console = Console()
    for policy, rows in summaries.items():
        console.print(summary_table(rows, f"Aggregation: {policy}"))


def show_sampling_plan(plan: SamplingPlan, console: Console | None = None) -> None:
    if console is None:
        console = Console()
    table = Table(title=f"Sampling plan ({len(plan.dataset_ids)} datasets)", title_justify="left")
    table.add_column("Dataset")
    table.add_column("Images", justify="right")
    table.add_column("Probability", justify="right")
    for dataset, size, probability in plan.as_rows():
        table.add_row(dataset, str(size), f"{probability:.6f}")
    console.print(table)


def show_schedule(schedule: LrSchedule, rates: Sequence[float], console: Console | None = None) -> None:
    """Print the schedule parameters and a few sample epochs."""
    if console is None:
        console = Console()
    meta = schedule.metadata()
    console.print(
        f"[bold]{meta['variant']}[/bold] base_lr={meta['base_lr']:g} "
        f"epochs={meta['total_epochs']} warmup={meta['warmup_epochs']} "
        f"exponent={meta['exponent']:g}"
    )
    last = len(rates) - 1
    samples = sorted({0, schedule.warmup_epochs - 1, schedule.warmup_epochs, last // 2, last} - {-1})
    table = Table(show_header=True)
    table.add_column("Epoch", justify="right")
    table.add_column("LR", justify="right")
    for epoch in samples:
        if 0 <= epoch <= last:
            table.add_row(str(epoch), f"{rates[epoch]:.6g}")
    console.print(table)
