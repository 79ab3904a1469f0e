"""
CSV tables: demographic metadata, per-case results and dataset sizes.

All tables are UTF-8 CSV with a header row. Empty cells mean "missing" (or
Undefined for metric columns); they are never read as zero.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from pathlib import Path

import pandas as pd

from lesionbench.core import CaseMeta, Sex
from lesionbench.errors import DuplicateCaseError, MetadataError
from lesionbench.evaluation import CaseResult
from lesionbench.metrics import MetricValue

logger = logging.getLogger(__name__)

META_COLUMNS = ("case_id", "sex", "age_years", "tsi_months", "cohort")
RESULT_COLUMNS = ("case_id", "dice", "nsd", "gt_empty", "pred_empty")
SIZE_COLUMNS = ("dataset", "count")

# Header is line 1, so data row i sits on line i + 2
_FIRST_DATA_LINE = 2


def _read_csv(path: str | Path, required: Sequence[str]) -> pd.DataFrame:
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError as e:
        raise MetadataError(f"{path} is empty", line=1) from e
    except pd.errors.ParserError as e:
        raise MetadataError(f"{path} is not valid CSV: {e}") from e
    frame.columns = [str(c).strip() for c in frame.columns]
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise MetadataError(f"{path} is missing columns {missing}", line=1)
    return frame


def _optional_number(cell: str, column: str, line: int) -> float | None:
    text = cell.strip()
    if not text:
        return None
    try:
        value = float(text)
    except ValueError:
        raise MetadataError(f"{column} {text!r} is not a number", line=line) from None
    if not math.isfinite(value) or value < 0:
        raise MetadataError(f"{column} must be a non-negative number, got {text!r}", line=line)
    return value


def _parse_sex(cell: str, line: int) -> Sex:
    text = cell.strip().lower()
    if not text:
        return Sex.UNKNOWN
    aliases = {"m": Sex.MALE, "f": Sex.FEMALE}
    if text in aliases:
        return aliases[text]
    try:
        return Sex(text)
    except ValueError:
        raise MetadataError(f"sex {cell!r} is not male, female or unknown", line=line) from None


def read_meta_table(path: str | Path) -> list[CaseMeta]:
    """
    Read the demographic table ``case_id,sex,age_years,tsi_months,cohort``.

    Args:
        path: CSV file

    Returns:
        One CaseMeta per row, in file order

    Raises:
        MetadataError: Missing columns or unparsable cells (with line number)
        DuplicateCaseError: If a case_id appears twice
    """
    frame = _read_csv(path, META_COLUMNS)
    metas: list[CaseMeta] = []
    seen: dict[str, int] = {}
    for offset, row in enumerate(frame.itertuples(index=False)):
        line = offset + _FIRST_DATA_LINE
        record = row._asdict()
        case_id = record["case_id"].strip()
        if not case_id:
            raise MetadataError("case_id is empty", line=line)
        if case_id in seen:
            raise DuplicateCaseError(
                f"duplicate case_id {case_id!r} (first seen at line {seen[case_id]})", line=line
            )
        seen[case_id] = line
        metas.append(
            CaseMeta(
                case_id=case_id,
                sex=_parse_sex(record["sex"], line),
                age_years=_optional_number(record["age_years"], "age_years", line),
                tsi_months=_optional_number(record["tsi_months"], "tsi_months", line),
                cohort=record["cohort"].strip(),
            )
        )
    logger.debug("read %d metadata rows from %s", len(metas), path)
    return metas


def results_frame(results: Sequence[CaseResult]) -> pd.DataFrame:
    """Per-case results as a DataFrame sorted by case_id (Undefined -> NaN)."""
    rows = [
        {
            "case_id": r.case_id,
            "dice": r.dice.value,
            "nsd": r.nsd.value,
            "gt_empty": r.gt_empty,
            "pred_empty": r.pred_empty,
        }
        for r in sorted(results, key=lambda r: r.case_id)
    ]
    return pd.DataFrame(rows, columns=list(RESULT_COLUMNS))


def write_case_results(results: Sequence[CaseResult], path: str | Path) -> None:
    """Write ``case_id,dice,nsd,gt_empty,pred_empty``; Undefined is an empty cell."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = results_frame(results)
    frame["gt_empty"] = frame["gt_empty"].map(lambda v: "true" if v else "false")
    frame["pred_empty"] = frame["pred_empty"].map(lambda v: "true" if v else "false")
    frame.to_csv(path, index=False, na_rep="", float_format="%.17g", lineterminator="\n")


def _parse_flag(cell: str, column: str, line: int) -> bool:
    text = cell.strip().lower()
    if text in ("true", "1", "yes"):
        return True
    if text in ("false", "0", "no"):
        return False
    raise MetadataError(f"{column} {cell!r} is not a boolean", line=line)


def _parse_metric(cell: str, column: str, line: int) -> MetricValue:
    text = cell.strip()
    if not text:
        return MetricValue.undefined()
    try:
        return MetricValue.of(float(text))
    except ValueError:
        raise MetadataError(f"{column} {text!r} is not a number in [0, 1]", line=line) from None


def read_case_results(path: str | Path) -> list[CaseResult]:
    """Read a per-case results CSV written by write_case_results."""
    frame = _read_csv(path, RESULT_COLUMNS)
    results: list[CaseResult] = []
    for offset, row in enumerate(frame.itertuples(index=False)):
        line = offset + _FIRST_DATA_LINE
        record = row._asdict()
        try:
            results.append(
                CaseResult(
                    case_id=record["case_id"].strip(),
                    dice=_parse_metric(record["dice"], "dice", line),
                    nsd=_parse_metric(record["nsd"], "nsd", line),
                    gt_empty=_parse_flag(record["gt_empty"], "gt_empty", line),
                    pred_empty=_parse_flag(record["pred_empty"], "pred_empty", line),
                )
            )
        except ValueError as e:
            if isinstance(e, MetadataError):
                raise
            raise MetadataError(str(e), line=line) from e
    return results


def read_dataset_sizes(path: str | Path) -> tuple[list[str], list[int]]:
    """
    Read ``dataset,count`` rows.

    Returns:
        (dataset ids, image counts) in file order

    Raises:
        MetadataError: On a non-integer or non-positive count
        DuplicateCaseError: If a dataset appears twice
    """
    frame = _read_csv(path, SIZE_COLUMNS)
    ids: list[str] = []
    counts: list[int] = []
    for offset, row in enumerate(frame.itertuples(index=False)):
        line = offset + _FIRST_DATA_LINE
        record = row._asdict()
        name = record["dataset"].strip()
        text = record["count"].strip()
        if not name:
            raise MetadataError("dataset name is empty", line=line)
        if name in ids:
            raise DuplicateCaseError(f"duplicate dataset {name!r}", line=line)
        try:
            count = int(text)
        except ValueError:
            raise MetadataError(f"count {text!r} is not an integer", line=line) from None
        if count < 1:
            raise MetadataError(f"count must be >= 1, got {count}", line=line)
        ids.append(name)
        counts.append(count)
    if not ids:
        raise MetadataError(f"{path} has no dataset rows")
    return ids, counts
