"""
Segmentation metrics: Dice and Normalized Surface Dice (NSD).

Masks are binarized with "any nonzero label is lesion". Surfaces are 6-connected
boundary voxels and surface distances are measured between voxel centers in
millimeters, using an exact Euclidean distance transform.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import ndimage

from lesionbench.core import Geometry, LabelMask, _frozen
from lesionbench.errors import ParameterError

logger = logging.getLogger(__name__)

# Absorbs floating-point ties at exactly the tolerance distance
TOLERANCE_SLACK_MM = 1e-9
DEFAULT_TOLERANCE_MM = 1.0

_FACE_CONNECTIVITY = ndimage.generate_binary_structure(3, 1)


class MetricBasis(Enum):
    """Why a metric has (or lacks) a value."""

    BOTH_EMPTY = "both_empty"
    DEFINED = "defined"


@dataclass(frozen=True)
class MetricValue:
    """
    A metric in [0, 1], or Undefined when both masks are empty.

    Attributes:
        value: Metric value, None when undefined
        basis: BOTH_EMPTY exactly when value is None
    """

    value: float | None
    basis: MetricBasis

    def __post_init__(self) -> None:
        if (self.value is None) != (self.basis is MetricBasis.BOTH_EMPTY):
            raise ParameterError("a metric is Undefined exactly when both masks are empty")
        if self.value is not None and not 0.0 <= self.value <= 1.0:
            raise ParameterError(f"metric value {self.value} outside [0, 1]")

    @classmethod
    def undefined(cls) -> MetricValue:
        return cls(value=None, basis=MetricBasis.BOTH_EMPTY)

    @classmethod
    def of(cls, value: float) -> MetricValue:
        return cls(value=float(value), basis=MetricBasis.DEFINED)

    @property
    def is_defined(self) -> bool:
        return self.value is not None


@dataclass(frozen=True)
class OverlapCounts:
    """Voxel counts behind the Dice coefficient."""

    gt_voxels: int
    pred_voxels: int
    intersection_voxels: int

    def __post_init__(self) -> None:
        if min(self.gt_voxels, self.pred_voxels, self.intersection_voxels) < 0:
            raise ParameterError("voxel counts must be non-negative")
        if self.intersection_voxels > min(self.gt_voxels, self.pred_voxels):
            raise ParameterError(
                f"intersection {self.intersection_voxels} exceeds "
                f"min({self.gt_voxels}, {self.pred_voxels})"
            )

    @property
    def dice(self) -> MetricValue:
        total = self.gt_voxels + self.pred_voxels
        if total == 0:
            return MetricValue.undefined()
        return MetricValue.of(2.0 * self.intersection_voxels / total)


@dataclass(frozen=True, eq=False)
class DistanceField:
    """Per-voxel distance in mm to the nearest reference voxel (+inf if none)."""

    geometry: Geometry
    distances_mm: np.ndarray

    def __post_init__(self) -> None:
        distances = np.asarray(self.distances_mm, dtype=np.float64)
        if distances.shape != self.geometry.dims:
            raise ParameterError(
                f"distance shape {distances.shape} does not match dims {self.geometry.dims}"
            )
        object.__setattr__(self, "distances_mm", _frozen(distances))


def overlap_counts(gt: LabelMask, pred: LabelMask, case_id: str | None = None) -> OverlapCounts:
    """Count ground-truth, predicted and shared foreground voxels."""
    gt.geometry.require_match(pred.geometry, case_id)
    gt_fg = gt.foreground
    pred_fg = pred.foreground
    return OverlapCounts(
        gt_voxels=int(np.count_nonzero(gt_fg)),
        pred_voxels=int(np.count_nonzero(pred_fg)),
        intersection_voxels=int(np.count_nonzero(gt_fg & pred_fg)),
    )


def dice(gt: LabelMask, pred: LabelMask, case_id: str | None = None) -> MetricValue:
    """
    Dice similarity coefficient 2|A∩B| / (|A| + |B|).

    Both empty gives Undefined; exactly one empty gives 0.

    Raises:
        ShapeMismatchError: If dims or spacing differ
    """
    return overlap_counts(gt, pred, case_id).dice


def _surface(foreground: np.ndarray) -> np.ndarray:
    # Voxels outside the volume count as background
    interior = ndimage.binary_erosion(
        foreground, structure=_FACE_CONNECTIVITY, border_value=0
    )
    return foreground & ~interior


def extract_surface(mask: LabelMask) -> np.ndarray:
    """
    Boolean indicator of the mask's surface voxels.

    A foreground voxel is on the surface when one of its 6 face neighbors is
    background or lies outside the volume.
    """
    return _surface(mask.foreground)


def _reference_array(
    reference: np.ndarray | Iterable[tuple[int, int, int]], dims: tuple[int, int, int]
) -> np.ndarray:
    if isinstance(reference, np.ndarray) and reference.dtype == np.bool_:
        if reference.shape != dims:
            raise ParameterError(f"reference shape {reference.shape} does not match dims {dims}")
        return reference
    array = np.zeros(dims, dtype=bool)
    for index in reference:
        array[tuple(int(i) for i in index)] = True
    return array


def _distances(reference: np.ndarray, spacing_mm: tuple[float, float, float]) -> np.ndarray:
    if not reference.any():
        return np.full(reference.shape, np.inf)
    return ndimage.distance_transform_edt(~reference, sampling=spacing_mm)


def edt(
    reference: np.ndarray | Iterable[tuple[int, int, int]], geometry: Geometry
) -> DistanceField:
    """
    Exact Euclidean distance transform in millimeters.

    Args:
        reference: Boolean indicator array or iterable of (i, j, k) indices
        geometry: Grid the distances are computed on (spacing weights each axis)

    Returns:
        DistanceField, 0 on reference voxels and +inf everywhere if the
        reference set is empty
    """
    ref = _reference_array(reference, geometry.dims)
    return DistanceField(geometry=geometry, distances_mm=_distances(ref, geometry.spacing_mm))


def _crop_box(foreground: np.ndarray) -> tuple[slice, ...]:
    """Bounding box of the foreground grown by one voxel, clipped to the volume."""
    box = []
    for axis, size in enumerate(foreground.shape):
        other = tuple(a for a in range(foreground.ndim) if a != axis)
        hits = np.flatnonzero(foreground.any(axis=other))
        box.append(slice(max(int(hits[0]) - 1, 0), min(int(hits[-1]) + 2, size)))
    return tuple(box)


def nsd(
    gt: LabelMask,
    pred: LabelMask,
    tolerance_mm: float = DEFAULT_TOLERANCE_MM,
    case_id: str | None = None,
) -> MetricValue:
    """
    Normalized Surface Dice at a millimeter tolerance.

    Fraction of both surfaces lying within ``tolerance_mm`` of the other
    surface, counted over boundary voxel centers:
    (|{s in S_pred: d(s, S_gt) <= tol}| + |{s in S_gt: d(s, S_pred) <= tol}|)
    / (|S_pred| + |S_gt|).

    Raises:
        ParameterError: If tolerance_mm is not positive
        ShapeMismatchError: If dims or spacing differ
    """
    if not tolerance_mm > 0:
        raise ParameterError(f"tolerance_mm must be > 0, got {tolerance_mm}")
    gt.geometry.require_match(pred.geometry, case_id)

    gt_fg = gt.foreground
    pred_fg = pred.foreground
    gt_any = bool(gt_fg.any())
    pred_any = bool(pred_fg.any())
    if not gt_any and not pred_any:
        return MetricValue.undefined()
    if gt_any != pred_any:
        return MetricValue.of(0.0)

    # Distances between surface voxels are unaffected by cropping; the one-voxel
    # margin keeps volume-edge surface detection identical to the full grid
    box = _crop_box(gt_fg | pred_fg)
    gt_surface = _surface(gt_fg[box])
    pred_surface = _surface(pred_fg[box])
    spacing = gt.geometry.spacing_mm

    tau = tolerance_mm + TOLERANCE_SLACK_MM
    to_gt = _distances(gt_surface, spacing)
    to_pred = _distances(pred_surface, spacing)
    within = int(np.count_nonzero(to_gt[pred_surface] <= tau)) + int(
        np.count_nonzero(to_pred[gt_surface] <= tau)
    )
    total = int(np.count_nonzero(gt_surface)) + int(np.count_nonzero(pred_surface))
    logger.debug("nsd case=%s within=%d surface=%d tol=%g", case_id, within, total, tolerance_mm)
    return MetricValue.of(within / total)
