"""
Probability ensembling under a controlled accumulation precision.

Half and single precision are emulated: every loaded value, every partial sum
and the final division are rounded to the mode's floating-point format
(round-to-nearest-even), independent of the hardware. Double precision is the
reference and is computed order-independently.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from lesionbench.core import LabelMask, ProbabilityStack
from lesionbench.errors import ParameterError, ShapeMismatchError

logger = logging.getLogger(__name__)

DEFAULT_DISAGREEMENT_CAP = 100

HALF_PRECISION_WARNING = (
    "half precision ensembling rounds every partial sum to 16 bits and can flip "
    "near-tie voxels; use single or double unless reproducing that failure"
)


class PrecisionMode(Enum):
    """Floating-point format used for ensemble accumulation."""

    HALF = "half"
    SINGLE = "single"
    DOUBLE = "double"

    @classmethod
    def parse(cls, value: str | PrecisionMode) -> PrecisionMode:
        if isinstance(value, cls):
            return value
        aliases = {"float16": "half", "float32": "single", "float64": "double"}
        text = str(value).lower()
        try:
            return cls(aliases.get(text, text))
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ParameterError(f"unknown precision {value!r} (choose from {choices})") from None

    @property
    def dtype(self) -> type[np.floating]:
        return {"half": np.float16, "single": np.float32, "double": np.float64}[self.value]

    @property
    def sum_tolerance(self) -> float:
        """How far class sums of an ensembled stack may stray from 1."""
        return 1e-2 if self is PrecisionMode.HALF else 1e-5


def quantize(values: np.ndarray, mode: PrecisionMode) -> np.ndarray:
    """Round to the mode's format (nearest-even) and return as float64."""
    array = np.asarray(values, dtype=np.float64)
    if mode is PrecisionMode.DOUBLE:
        return array
    return array.astype(mode.dtype).astype(np.float64)


def _check_compatible(stacks: Sequence[ProbabilityStack]) -> None:
    first = stacks[0]
    for index, stack in enumerate(stacks[1:], start=1):
        if stack.classes != first.classes:
            raise ShapeMismatchError(
                f"stack {index} has {stack.classes} classes, stack 0 has {first.classes}"
            )
        first.geometry.require_match(stack.geometry)


def ensemble_probs(
    stacks: Sequence[ProbabilityStack],
    mode: str | PrecisionMode = PrecisionMode.SINGLE,
) -> ProbabilityStack:
    """
    Voxelwise mean of K probability stacks.

    Half/single: each stack is rounded on load, added in input order with the
    running sum rounded after every addition, and the sum is divided by K once
    and rounded. Double: the order-independent reference (stacks are
    sorted per voxel before summation), so K identical stacks return the
    stack unchanged.

    Args:
        stacks: One or more stacks with identical geometry and class count
        mode: Accumulation precision

    Returns:
        Ensembled stack recording ``mode`` as its precision

    Raises:
        ParameterError: If no stacks are given
        ShapeMismatchError: If geometry or class counts differ
    """
    if not stacks:
        raise ParameterError("ensemble_probs needs at least one stack")
    mode = PrecisionMode.parse(mode)
    _check_compatible(stacks)
    k = len(stacks)

    if mode is PrecisionMode.DOUBLE:
        ordered = np.sort(np.stack([s.probs for s in stacks]), axis=0)
        low = ordered[0]
        mean = low + np.sum(ordered - low, axis=0) / k
    else:
        total = quantize(stacks[0].probs, mode)
        for stack in stacks[1:]:
            total = quantize(total + quantize(stack.probs, mode), mode)
        mean = quantize(total / k, mode)

    logger.debug("ensembled %d stacks in %s precision", k, mode.value)
    return ProbabilityStack(
        geometry=stacks[0].geometry,
        probs=mean,
        precision=mode,
        sum_tolerance=mode.sum_tolerance,
    )


def argmax_labels(stack: ProbabilityStack) -> LabelMask:
    """Most probable class per voxel; ties go to the lowest class index."""
    labels = np.argmax(stack.probs, axis=0)
    dtype = np.uint8 if stack.classes <= 256 else np.int16
    return LabelMask(geometry=stack.geometry, labels=labels.astype(dtype))


@dataclass(frozen=True)
class DisagreementReport:
    """
    Voxels where two labelings differ.

    Attributes:
        count: Total number of differing voxels
        voxels: First ``cap`` differing (i, j, k) indices in index order
        cap: Maximum length of ``voxels``
    """

    count: int
    voxels: list[tuple[int, int, int]] = field(default_factory=list)
    cap: int = DEFAULT_DISAGREEMENT_CAP

    @property
    def identical(self) -> bool:
        return self.count == 0

    def to_dict(self) -> dict:
        return {"count": self.count, "cap": self.cap, "voxels": [list(v) for v in self.voxels]}


def compare_labelings(
    a: LabelMask,
    b: LabelMask,
    cap: int = DEFAULT_DISAGREEMENT_CAP,
    case_id: str | None = None,
) -> DisagreementReport:
    """
    Count and list voxels where two label masks differ.

    Raises:
        ParameterError: If cap is negative
        ShapeMismatchError: If geometries differ
    """
    if cap < 0:
        raise ParameterError(f"cap must be >= 0, got {cap}")
    a.geometry.require_match(b.geometry, case_id)
    differing = a.labels != b.labels
    count = int(np.count_nonzero(differing))
    voxels = [tuple(int(i) for i in idx) for idx in np.argwhere(differing)[:cap]]
    return DisagreementReport(count=count, voxels=voxels, cap=cap)  # type: ignore[arg-type]
