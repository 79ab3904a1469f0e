"""
Training-side schedules: dataset sampling, learning rates and fold splits.

Everything here is pure arithmetic. Randomness comes from a counter-based
Philox generator seeded explicitly, so sequences and folds are identical
across platforms.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from enum import Enum
from numbers import Integral
from typing import Any

import numpy as np

from lesionbench.errors import ParameterError

logger = logging.getLogger(__name__)

DEFAULT_POLY_EXPONENT = 0.9
DEFAULT_FOLDS = 5


def _generator(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


@dataclass(frozen=True)
class SamplingPlan:
    """
    Dataset sampling probabilities, inversely proportional to sqrt(size).

    Attributes:
        dataset_ids: Dataset names in input order
        sizes: Image count per dataset
        probabilities: Normalized sampling probability per dataset
    """

    dataset_ids: tuple[str, ...]
    sizes: tuple[int, ...]
    probabilities: tuple[float, ...]

    def __post_init__(self) -> None:
        if not (len(self.dataset_ids) == len(self.sizes) == len(self.probabilities)):
            raise ParameterError("dataset_ids, sizes and probabilities must have equal length")
        if len(set(self.dataset_ids)) != len(self.dataset_ids):
            raise ParameterError("dataset_ids must be unique")

    def as_rows(self) -> list[tuple[str, int, float]]:
        return list(zip(self.dataset_ids, self.sizes, self.probabilities))


def sampling_weights(
    sizes: Sequence[int], dataset_ids: Sequence[str] | None = None
) -> SamplingPlan:
    """
    Probabilities p_i = s_i^(-1/2) / sum_j s_j^(-1/2).

    Args:
        sizes: Image count per dataset, integers >= 1
        dataset_ids: Names for the datasets; defaults to "0", "1", ...

    Raises:
        ParameterError: If sizes is empty or any size is not a positive integer
    """
    if len(sizes) == 0:
        raise ParameterError("sampling_weights needs at least one dataset size")
    for size in sizes:
        if isinstance(size, bool) or not isinstance(size, Integral) or size < 1:
            raise ParameterError(f"dataset sizes must be integers >= 1, got {size!r}")
    ids = tuple(str(i) for i in range(len(sizes))) if dataset_ids is None else tuple(dataset_ids)
    if len(ids) != len(sizes):
        raise ParameterError(f"{len(ids)} dataset ids for {len(sizes)} sizes")

    weights = [1.0 / math.sqrt(int(s)) for s in sizes]
    total = math.fsum(weights)
    return SamplingPlan(
        dataset_ids=ids,
        sizes=tuple(int(s) for s in sizes),
        probabilities=tuple(w / total for w in weights),
    )


def sample_sequence(plan: SamplingPlan, seed: int, count: int) -> list[str]:
    """Draw ``count`` dataset ids i.i.d. from the plan, deterministically per seed."""
    if count < 0:
        raise ParameterError(f"count must be >= 0, got {count}")
    if count == 0:
        return []
    draws = _generator(seed).choice(len(plan.dataset_ids), size=count, p=plan.probabilities)
    return [plan.dataset_ids[i] for i in draws]


class ScheduleVariant(Enum):
    POLY = "poly"
    WARMUP_THEN_POLY = "warmup_then_poly"


@dataclass(frozen=True)
class LrSchedule:
    """
    Epoch-indexed learning rate schedule.

    ``base_lr`` is the initial rate for poly and the warm-up target for
    warmup_then_poly. After warm-up the poly decay restarts its clock and
    stretches over the remaining ``total_epochs - warmup_epochs`` epochs.
    """

    variant: ScheduleVariant
    base_lr: float
    total_epochs: int
    warmup_epochs: int = 0
    exponent: float = DEFAULT_POLY_EXPONENT

    def __post_init__(self) -> None:
        object.__setattr__(self, "variant", ScheduleVariant(self.variant))
        if not (math.isfinite(self.base_lr) and self.base_lr > 0):
            raise ParameterError(f"learning rate must be > 0, got {self.base_lr}")
        if self.total_epochs < 1:
            raise ParameterError(f"total_epochs must be >= 1, got {self.total_epochs}")
        if not (math.isfinite(self.exponent) and self.exponent >= 0):
            raise ParameterError(f"exponent must be >= 0, got {self.exponent}")
        if self.variant is ScheduleVariant.POLY and self.warmup_epochs != 0:
            raise ParameterError("poly schedules have no warm-up epochs")
        if self.variant is ScheduleVariant.WARMUP_THEN_POLY and not (
            1 <= self.warmup_epochs < self.total_epochs
        ):
            raise ParameterError(
                f"warmup_epochs must lie in [1, {self.total_epochs - 1}], got {self.warmup_epochs}"
            )

    @classmethod
    def poly(
        cls, lr0: float, total_epochs: int, exponent: float = DEFAULT_POLY_EXPONENT
    ) -> LrSchedule:
        return cls(ScheduleVariant.POLY, lr0, total_epochs, 0, exponent)

    @classmethod
    def warmup_then_poly(
        cls,
        target: float,
        warmup_epochs: int,
        total_epochs: int,
        exponent: float = DEFAULT_POLY_EXPONENT,
    ) -> LrSchedule:
        return cls(ScheduleVariant.WARMUP_THEN_POLY, target, total_epochs, warmup_epochs, exponent)

    def metadata(self) -> dict[str, Any]:
        """Schedule parameters plus the conventions behind them."""
        meta: dict[str, Any] = {
            "variant": self.variant.value,
            "base_lr": self.base_lr,
            "total_epochs": self.total_epochs,
            "warmup_epochs": self.warmup_epochs,
            "exponent": self.exponent,
        }
        if self.variant is ScheduleVariant.WARMUP_THEN_POLY:
            meta["warmup_ramp"] = "target*(epoch+1)/warmup_epochs"
            meta["poly_clock"] = "restarts after warm-up"
        return meta


def lr_at(schedule: LrSchedule, epoch: int) -> float:
    """
    Learning rate at a 0-indexed epoch.

    Raises:
        ParameterError: If epoch is outside [0, total_epochs)
    """
    if not 0 <= epoch < schedule.total_epochs:
        raise ParameterError(f"epoch must lie in [0, {schedule.total_epochs}), got {epoch}")
    if schedule.variant is ScheduleVariant.POLY:
        return schedule.base_lr * (1 - epoch / schedule.total_epochs) ** schedule.exponent

    warmup = schedule.warmup_epochs
    if epoch < warmup:
        return schedule.base_lr * (epoch + 1) / warmup
    remaining = schedule.total_epochs - warmup
    return schedule.base_lr * (1 - (epoch - warmup) / remaining) ** schedule.exponent


def lr_table(schedule: LrSchedule) -> list[float]:
    """Learning rate for every epoch of the schedule."""
    return [lr_at(schedule, epoch) for epoch in range(schedule.total_epochs)]


def make_folds(case_ids: Sequence[str], k: int = DEFAULT_FOLDS, seed: int = 0) -> list[list[str]]:
    """
    Split case ids into ``k`` disjoint folds.

    Ids are sorted, shuffled with a seeded Philox permutation and dealt
    round-robin, so fold sizes differ by at most one. Each fold is returned
    sorted.

    Raises:
        ParameterError: If k < 2, there are fewer ids than folds, or ids repeat
    """
    if k < 2:
        raise ParameterError(f"k must be >= 2, got {k}")
    ids = sorted(str(c) for c in case_ids)
    if len(ids) < k:
        raise ParameterError(f"{len(ids)} cases cannot fill {k} folds")
    if len(set(ids)) != len(ids):
        raise ParameterError("case ids must be unique")

    order = _generator(seed).permutation(len(ids))
    shuffled = [ids[i] for i in order]
    folds = [sorted(shuffled[i::k]) for i in range(k)]
    logger.debug("made %d folds of sizes %s (seed %d)", k, [len(f) for f in folds], seed)
    return folds


def folds_to_splits(folds: Sequence[Sequence[str]]) -> list[dict[str, list[str]]]:
    """Train/val split per fold, in the nnU-Net ``splits_final.json`` layout."""
    splits = []
    for index, fold in enumerate(folds):
        train = sorted(c for j, other in enumerate(folds) if j != index for c in other)
        splits.append({"train": train, "val": sorted(fold)})
    return splits
