"""Stage timing for lesionbench commands.

Timings are diagnostics only: they are logged and never written into result
files, so outputs stay byte-identical between runs.
"""

from __future__ import annotations

import logging
import time
from collections.abc import Generator
from contextlib import contextmanager
from dataclasses import dataclass

logger = logging.getLogger(__name__)


@dataclass
class StageStats:
    """Accumulated timing for one named stage."""

    stage: str
    calls: int = 0
    total_seconds: float = 0.0
    max_seconds: float = 0.0

    @property
    def average_seconds(self) -> float:
        if self.calls == 0:
            return 0.0
        return self.total_seconds / self.calls

    def add(self, seconds: float) -> None:
        self.calls += 1
        self.total_seconds += seconds
        self.max_seconds = max(self.max_seconds, seconds)


class PerformanceMonitor:
    """Record how long pipeline stages take.

    Example:
        >>> monitor = PerformanceMonitor()
        >>> with monitor.measure("read"):
        ...     pass
        >>> monitor.get_stats("read").calls
        1
    """

    def __init__(self, slow_stage_threshold: float = 30.0):
        """
        Args:
            slow_stage_threshold: Seconds after which a single call is logged as slow
        """
        self.stats: dict[str, StageStats] = {}
        self.slow_stage_threshold = slow_stage_threshold

    def record(self, stage: str, seconds: float) -> None:
        self.stats.setdefault(stage, StageStats(stage=stage)).add(seconds)
        if seconds > self.slow_stage_threshold:
            logger.info("slow stage %s: %.1fs", stage, seconds)
        else:
            logger.debug("stage %s took %.3fs", stage, seconds)

    @contextmanager
    def measure(self, stage: str) -> Generator[None, None, None]:
        """Time the enclosed block under ``stage``."""
        start = time.perf_counter()
        try:
            yield
        finally:
            self.record(stage, time.perf_counter() - start)

    def get_stats(self, stage: str) -> StageStats | None:
        return self.stats.get(stage)

    def get_total_time(self) -> float:
        return sum(s.total_seconds for s in self.stats.values())

    def get_summary(self) -> str:
        """One line per stage, sorted by name."""
        if not self.stats:
            return "No stages timed."
        parts = [
            f"{name}: {s.total_seconds:.2f}s over {s.calls} call(s)"
            for name, s in sorted(self.stats.items())
        ]
        return "Timing: " + "; ".join(parts)
