"""
Per-case evaluation, aggregation policies, fold averaging and subgroup reports.

Two aggregation policies disagree on cases where neither the ground truth nor
the prediction has foreground (both metrics Undefined):

- ``NAN_AS_ONE`` scores such cases as a perfect 1.0 and keeps them.
- ``IGNORE_NAN`` drops them from the mean.

Cases with an empty ground truth and a nonempty prediction score 0 under both
policies. NSD follows the same mapping as Dice.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum

from lesionbench.core import CaseMeta, LabelMask, Sex
from lesionbench.errors import DuplicateCaseError, JoinError, ParameterError
from lesionbench.metrics import DEFAULT_TOLERANCE_MM, MetricValue, nsd, overlap_counts

logger = logging.getLogger(__name__)

FOLD_COUNT = 5
UNKNOWN_GROUP = "unknown"
ALL_GROUP = "All"

DEFAULT_AGE_EDGES: tuple[float, ...] = (0, 10, 20, 30, 40, 50, 60, 70, 80)
DEFAULT_TSI_EDGES: tuple[float, ...] = (0, 6, 12, 24, 60, math.inf)


def round_half_away(value: float, digits: int = 2) -> float:
    """Round for display, halves away from zero on the decimal representation."""
    quantum = Decimal(1).scaleb(-digits)
    return float(Decimal(repr(float(value))).quantize(quantum, rounding=ROUND_HALF_UP))


class AggregationPolicy(Enum):
    """How Undefined (empty ground truth, empty prediction) cases enter a mean."""

    NAN_AS_ONE = "nan_as_one"
    IGNORE_NAN = "ignore_nan"

    @classmethod
    def parse(cls, value: str | AggregationPolicy) -> AggregationPolicy:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower().replace("-", "_"))
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ParameterError(f"unknown policy {value!r} (choose from {choices})") from None

    def resolve(self, metric: MetricValue) -> float | None:
        """Value a metric contributes to a mean, or None when the case is excluded."""
        if metric.value is not None:
            return metric.value
        return 1.0 if self is AggregationPolicy.NAN_AS_ONE else None


@dataclass(frozen=True)
class CaseResult:
    """Dice and NSD for one case plus the emptiness flags behind them."""

    case_id: str
    dice: MetricValue
    nsd: MetricValue
    gt_empty: bool
    pred_empty: bool

    def __post_init__(self) -> None:
        both_empty = self.gt_empty and self.pred_empty
        for name in ("dice", "nsd"):
            metric: MetricValue = getattr(self, name)
            if metric.is_defined == both_empty:
                raise ParameterError(
                    f"case {self.case_id}: {name} must be Undefined exactly when both masks are empty"
                )


@dataclass(frozen=True)
class SummaryRow:
    """
    Aggregated row of a report table.

    Means are percentages (x100) and are None exactly when no case was included.
    """

    group: str
    n_included: int
    mean_dice_pct: float | None
    mean_nsd_pct: float | None

    def __post_init__(self) -> None:
        has_means = self.mean_dice_pct is not None and self.mean_nsd_pct is not None
        if has_means != (self.n_included >= 1):
            raise ParameterError(f"group {self.group}: means are reported only when n_included >= 1")

    @property
    def is_empty(self) -> bool:
        return self.n_included == 0


class SubgroupAxis(Enum):
    SEX = "sex"
    AGE = "age"
    TSI = "tsi"


def _format_edge(value: float) -> str:
    return "inf" if math.isinf(value) else f"{value:g}"


@dataclass(frozen=True)
class SubgroupSpec:
    """
    Stratification request for subgroup_report.

    Attributes:
        axis: Demographic axis
        bin_edges: Strictly increasing edges for age/tsi; bins are [lo, hi)
            with the last bin closed
        exclusion: Drop empty/empty cases before binning (IgnoreNan);
            otherwise they count as 1.0 (NanAsOne)
    """

    axis: SubgroupAxis
    bin_edges: tuple[float, ...] = ()
    exclusion: bool = True

    def __post_init__(self) -> None:
        axis = SubgroupAxis(self.axis)
        object.__setattr__(self, "axis", axis)
        edges = tuple(float(e) for e in self.bin_edges)
        if axis is SubgroupAxis.SEX:
            if edges:
                raise ParameterError("the sex axis takes no bin edges")
        else:
            if not edges:
                edges = DEFAULT_AGE_EDGES if axis is SubgroupAxis.AGE else DEFAULT_TSI_EDGES
                edges = tuple(float(e) for e in edges)
            if len(edges) < 2:
                raise ParameterError(f"{axis.value} bins need at least 2 edges, got {list(edges)}")
            if any(b <= a for a, b in zip(edges, edges[1:])):
                raise ParameterError(f"bin edges must be strictly increasing: {list(edges)}")
            if math.isnan(sum(edges)) or math.isinf(edges[0]):
                raise ParameterError(f"invalid bin edges: {list(edges)}")
        object.__setattr__(self, "bin_edges", edges)

    @property
    def policy(self) -> AggregationPolicy:
        return AggregationPolicy.IGNORE_NAN if self.exclusion else AggregationPolicy.NAN_AS_ONE

    def labels(self) -> list[str]:
        """Row labels in report order; "unknown" is always last."""
        if self.axis is SubgroupAxis.SEX:
            return [Sex.MALE.value, Sex.FEMALE.value, UNKNOWN_GROUP]
        edges = self.bin_edges
        labels = []
        for i, (lo, hi) in enumerate(zip(edges, edges[1:])):
            if math.isinf(hi):
                labels.append(f"{_format_edge(lo)}+")
            elif i == len(edges) - 2:
                labels.append(f"[{_format_edge(lo)}, {_format_edge(hi)}]")
            else:
                labels.append(f"[{_format_edge(lo)}, {_format_edge(hi)})")
        return [*labels, UNKNOWN_GROUP]

    def group_of(self, meta: CaseMeta) -> str:
        """Label of the bin a case falls into."""
        if self.axis is SubgroupAxis.SEX:
            return meta.sex.value
        value = meta.age_years if self.axis is SubgroupAxis.AGE else meta.tsi_months
        labels = self.labels()
        if value is None:
            return UNKNOWN_GROUP
        edges = self.bin_edges
        last = len(edges) - 2
        for i, (lo, hi) in enumerate(zip(edges, edges[1:])):
            if lo <= value < hi or (i == last and value == hi):
                return labels[i]
        return UNKNOWN_GROUP


def evaluate_case(
    gt: LabelMask,
    pred: LabelMask,
    tolerance_mm: float = DEFAULT_TOLERANCE_MM,
    case_id: str = "",
) -> CaseResult:
    """
    Dice and NSD of one prediction against its ground truth.

    Raises:
        ShapeMismatchError: If geometries differ (message carries case_id)
    """
    counts = overlap_counts(gt, pred, case_id or None)
    return CaseResult(
        case_id=case_id,
        dice=counts.dice,
        nsd=nsd(gt, pred, tolerance_mm, case_id or None),
        gt_empty=counts.gt_voxels == 0,
        pred_empty=counts.pred_voxels == 0,
    )


def _mean_pct(values: list[float]) -> float:
    return 100.0 * math.fsum(values) / len(values)


def _summarize(results: Iterable[CaseResult], policy: AggregationPolicy, group: str) -> SummaryRow:
    dices: list[float] = []
    nsds: list[float] = []
    for result in sorted(results, key=lambda r: r.case_id):
        dice_value = policy.resolve(result.dice)
        nsd_value = policy.resolve(result.nsd)
        if dice_value is None or nsd_value is None:
            continue
        dices.append(dice_value)
        nsds.append(nsd_value)
    if not dices:
        return SummaryRow(group=group, n_included=0, mean_dice_pct=None, mean_nsd_pct=None)
    return SummaryRow(
        group=group,
        n_included=len(dices),
        mean_dice_pct=_mean_pct(dices),
        mean_nsd_pct=_mean_pct(nsds),
    )


def aggregate(
    results: Sequence[CaseResult],
    policy: str | AggregationPolicy,
    group: str = ALL_GROUP,
) -> SummaryRow:
    """
    Mean Dice and NSD (in percent) over a result set.

    Values are summed in case_id order so the mean does not depend on input
    order. When every case is excluded the row has ``n_included == 0`` and no
    means.

    Raises:
        ParameterError: If ``results`` is empty
    """
    if not results:
        raise ParameterError("cannot aggregate an empty result list")
    return _summarize(results, AggregationPolicy.parse(policy), group)


def fold_average(per_fold_means_pct: Sequence[float], folds: int = FOLD_COUNT) -> float:
    """Mean of the per-fold means, rounded half away from zero to two decimals."""
    values = [float(v) for v in per_fold_means_pct]
    if len(values) != folds:
        raise ParameterError(f"expected {folds} fold means, got {len(values)}")
    low = min(values)
    # Shifted sum keeps constant inputs exact
    mean = low + math.fsum(v - low for v in values) / folds
    return round_half_away(mean, 2)


def _meta_index(metas: Iterable[CaseMeta]) -> dict[str, CaseMeta]:
    index: dict[str, CaseMeta] = {}
    for meta in metas:
        if meta.case_id in index:
            raise DuplicateCaseError(f"duplicate case_id {meta.case_id!r}")
        index[meta.case_id] = meta
    return index


def join_metadata(
    results: Iterable[CaseResult], metas: Iterable[CaseMeta]
) -> list[tuple[CaseResult, CaseMeta]]:
    """
    Pair each result with its metadata row.

    Raises:
        JoinError: Listing every case_id without metadata
    """
    index = _meta_index(metas)
    results = list(results)
    missing = [r.case_id for r in results if r.case_id not in index]
    if missing:
        raise JoinError(missing)
    return [(r, index[r.case_id]) for r in results]


def subgroup_report(
    results: Sequence[CaseResult], metas: Sequence[CaseMeta], spec: SubgroupSpec
) -> list[SummaryRow]:
    """
    One SummaryRow per bin of ``spec.axis`` plus an "unknown" row.

    Bins without included cases report ``n_included == 0`` and no means.
    """
    pairs = join_metadata(results, metas)
    groups: dict[str, list[CaseResult]] = {label: [] for label in spec.labels()}
    for result, meta in pairs:
        groups[spec.group_of(meta)].append(result)

    rows = [_summarize(members, spec.policy, label) for label, members in groups.items()]
    logger.debug(
        "subgroup %s: %s",
        spec.axis.value,
        ", ".join(f"{r.group}={r.n_included}" for r in rows),
    )
    return rows


def sex_breakdown_rows(
    results: Sequence[CaseResult],
    metas: Sequence[CaseMeta],
    policy: str | AggregationPolicy,
) -> list[SummaryRow]:
    """All / male / female rows under one policy."""
    policy = AggregationPolicy.parse(policy)
    pairs = join_metadata(results, metas)
    rows = [aggregate(results, policy, ALL_GROUP)]
    for sex in (Sex.MALE, Sex.FEMALE):
        members = [r for r, m in pairs if m.sex is sex]
        rows.append(_summarize(members, policy, sex.value))
    return rows
