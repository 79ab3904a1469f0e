"""Error types and failure bookkeeping for lesionbench.

This module provides the exception hierarchy raised by the readers, metrics and
pipelines, error classification for failure manifests, and the exit-code
contract shared by every CLI subcommand.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from enum import Enum, IntEnum
from pathlib import Path
from typing import Any

logger = logging.getLogger(__name__)


class ExitCode(IntEnum):
    """Process exit codes (stable contract for automation)."""

    SUCCESS = 0
    USAGE = 1  # usage or configuration error
    PARTIAL = 2  # some inputs failed, the rest were processed


class LesionBenchError(Exception):
    """Base class for all lesionbench errors."""


class VolumeFormatError(LesionBenchError):
    """The file is not a supported NIfTI-1 single-file volume."""

    def __init__(self, message: str, path: str | Path | None = None):
        """
        Initialize format error.

        Args:
            message: Error message
            path: File the error refers to
        """
        location = f" in {path}" if path is not None else ""
        super().__init__(f"{message}{location}")
        self.path = str(path) if path is not None else None


class UnsupportedDatatypeError(VolumeFormatError):
    """The NIfTI datatype code is outside {uint8, int16, float32}."""


class TruncatedVolumeError(VolumeFormatError):
    """The file holds fewer bytes than its header announces."""


class ParameterError(LesionBenchError, ValueError):
    """An argument is outside its documented range."""


class ModeError(ParameterError):
    """An interpolation or precision mode is not allowed for the input."""


class ShapeMismatchError(LesionBenchError, ValueError):
    """Two inputs that must share geometry do not."""

    def __init__(self, message: str, case_id: str | None = None):
        prefix = f"case {case_id}: " if case_id else ""
        super().__init__(f"{prefix}{message}")
        self.case_id = case_id


class MetadataError(LesionBenchError, ValueError):
    """A metadata or table row failed validation."""

    def __init__(self, message: str, line: int | None = None):
        location = f" at line {line}" if line is not None else ""
        super().__init__(f"{message}{location}")
        self.line = line


class DuplicateCaseError(MetadataError):
    """The same case_id appears twice in one table."""


class JoinError(LesionBenchError):
    """Results and metadata could not be joined on case_id."""

    def __init__(self, case_ids: list[str]):
        self.case_ids = sorted(case_ids)
        shown = ", ".join(self.case_ids[:20])
        more = f" (+{len(self.case_ids) - 20} more)" if len(self.case_ids) > 20 else ""
        super().__init__(f"no metadata for case_ids: {shown}{more}")


class ErrorCategory(Enum):
    """Categories of errors recorded in failure manifests."""

    FORMAT = "format"  # unreadable or unsupported volume files
    IO = "io"  # file system errors (missing, permissions)
    VALIDATION = "validation"  # bad parameters, metadata rows
    GEOMETRY = "geometry"  # shape or spacing mismatches
    UNKNOWN = "unknown"


def classify_error(error: Exception) -> ErrorCategory:
    """Classify an exception into an ErrorCategory.

    Args:
        error: The exception to classify

    Returns:
        ErrorCategory enum value
    """
    # Order matters: ShapeMismatchError and ParameterError are also ValueErrors
    if isinstance(error, VolumeFormatError):
        return ErrorCategory.FORMAT
    if isinstance(error, ShapeMismatchError):
        return ErrorCategory.GEOMETRY
    if isinstance(error, (ParameterError, MetadataError, JoinError, ValueError)):
        return ErrorCategory.VALIDATION
    if isinstance(error, OSError):
        return ErrorCategory.IO
    return ErrorCategory.UNKNOWN


@dataclass
class FailureRecord:
    """One failed input in a batch run."""

    item: str
    category: str
    message: str

    @classmethod
    def from_error(cls, item: str, error: Exception) -> FailureRecord:
        """Plain-data record of an exception (safe to send between processes)."""
        return cls(item=item, category=classify_error(error).value, message=str(error))


@dataclass
class FailureLog:
    """Collects per-item failures of a batch command and writes the manifest.

    Example:
        >>> failures = FailureLog("preprocess")
        >>> failures.record("c1.nii.gz", VolumeFormatError("bad magic"))
        >>> failures.has_failures()
        True
    """

    command: str
    records: list[FailureRecord] = field(default_factory=list)

    def record(
        self, item: str, error: Exception, context: dict[str, Any] | None = None
    ) -> FailureRecord:
        """Record and log a failure.

        Args:
            item: Name of the file or case that failed
            error: The exception raised while processing it
            context: Additional context written to the log line

        Returns:
            The stored FailureRecord
        """
        failure = FailureRecord.from_error(item, error)
        return self.add(failure, context)

    def add(self, failure: FailureRecord, context: dict[str, Any] | None = None) -> FailureRecord:
        """Store and log an already classified failure."""
        self.records.append(failure)

        log_message = f"{self.command}: {failure.item} failed: {failure.message} [{failure.category}]"
        if context:
            context_str = ", ".join(f"{k}={v}" for k, v in context.items())
            log_message += f" (context: {context_str})"
        logger.error(log_message)
        return failure

    def has_failures(self) -> bool:
        """Return True when at least one item failed."""
        return bool(self.records)

    def get_stats(self) -> dict[str, int]:
        """Count failures per category."""
        stats: dict[str, int] = {}
        for failure in self.records:
            stats[failure.category] = stats.get(failure.category, 0) + 1
        return stats

    def exit_code(self) -> ExitCode:
        """PARTIAL when anything failed, SUCCESS otherwise."""
        return ExitCode.PARTIAL if self.records else ExitCode.SUCCESS

    def write_manifest(self, path: Path) -> None:
        """Write the failure manifest as JSON, sorted by item."""
        payload = {
            "command": self.command,
            "failures": [asdict(r) for r in sorted(self.records, key=lambda r: r.item)],
            "stats": self.get_stats(),
        }
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
