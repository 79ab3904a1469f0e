"""
Preprocessing: isotropic resampling and per-volume z-score normalization.

Resampling works on voxel centers. Output voxel ``o`` along an axis with source
spacing ``s`` and target spacing ``t`` samples source coordinate
``(o + 0.5) * t / s - 0.5``, clamped to the volume. Trilinear interpolation is
applied separably, one axis at a time.
"""

from __future__ import annotations

import logging
import math
from enum import Enum

import numpy as np

from lesionbench.core import Geometry, LabelMask, VoxelGrid
from lesionbench.errors import ModeError, ParameterError

logger = logging.getLogger(__name__)

DEFAULT_TARGET_MM = 1.0
ZSCORE_MIN_STD = 1e-8

# Recorded in report metadata; images are resampled first, then normalized
PREPROCESSING_ORDER = "resample>zscore"


class Interpolation(Enum):
    """Resampling interpolation mode."""

    TRILINEAR = "trilinear"
    NEAREST = "nearest"

    @classmethod
    def parse(cls, value: str | Interpolation) -> Interpolation:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ModeError(f"unknown interpolation {value!r} (choose from {choices})") from None


def round_half_away_int(value: float) -> int:
    """Round to the nearest integer, halves away from zero."""
    return int(math.copysign(math.floor(abs(value) + 0.5), value))


def output_dims(
    dims: tuple[int, int, int], spacing_mm: tuple[float, float, float], target_mm: float
) -> tuple[int, int, int]:
    """Voxel counts after resampling: max(1, round(n * s / target))."""
    return tuple(  # type: ignore[return-value]
        max(1, round_half_away_int(n * s / target_mm)) for n, s in zip(dims, spacing_mm)
    )


def _source_coords(n_out: int, n_in: int, spacing: float, target_mm: float) -> np.ndarray:
    coords = (np.arange(n_out, dtype=np.float64) + 0.5) * (target_mm / spacing) - 0.5
    return np.clip(coords, 0.0, n_in - 1)


def _linear_axis(data: np.ndarray, axis: int, coords: np.ndarray) -> np.ndarray:
    n = data.shape[axis]
    lo = np.clip(np.floor(coords).astype(np.intp), 0, n - 1)
    hi = np.minimum(lo + 1, n - 1)
    weight_shape = [1] * data.ndim
    weight_shape[axis] = coords.size
    w = (coords - lo).reshape(weight_shape)
    a = np.take(data, lo, axis=axis)
    b = np.take(data, hi, axis=axis)
    # Exact for constant neighbors and for zero weight
    return a + (b - a) * w


def _nearest_axis(data: np.ndarray, axis: int, coords: np.ndarray) -> np.ndarray:
    n = data.shape[axis]
    # ceil(x - 0.5) sends exact halves to the lower index
    index = np.clip(np.ceil(coords - 0.5).astype(np.intp), 0, n - 1)
    return np.take(data, index, axis=axis)


def _resampled_geometry(geometry: Geometry, dims: tuple[int, int, int], target_mm: float) -> Geometry:
    affine = np.array(geometry.affine, dtype=np.float64)
    ratios = np.array([target_mm / s for s in geometry.spacing_mm])
    # Source voxel coordinate of the first output voxel center
    first_center = 0.5 * ratios - 0.5
    origin = affine @ np.append(first_center, 1.0)
    new_affine = affine.copy()
    new_affine[:3, :3] = affine[:3, :3] * ratios
    new_affine[:3, 3] = origin[:3]
    return Geometry(dims=dims, spacing_mm=(target_mm,) * 3, affine=new_affine)


def resample_isotropic(
    grid: VoxelGrid | LabelMask,
    target_mm: float = DEFAULT_TARGET_MM,
    mode: str | Interpolation | None = None,
) -> VoxelGrid | LabelMask:
    """
    Resample a grid or mask to cubic ``target_mm`` spacing.

    Args:
        grid: Image or label mask
        target_mm: Output spacing in millimeters
        mode: "trilinear" or "nearest"; defaults to trilinear for images and
            nearest for masks

    Returns:
        Same type as ``grid`` with spacing (target, target, target)

    Raises:
        ParameterError: If target_mm is not positive
        ModeError: If trilinear is requested for a LabelMask
    """
    if not (math.isfinite(target_mm) and target_mm > 0):
        raise ParameterError(f"target_mm must be > 0, got {target_mm}")
    is_mask = isinstance(grid, LabelMask)
    if mode is None:
        interpolation = Interpolation.NEAREST if is_mask else Interpolation.TRILINEAR
    else:
        interpolation = Interpolation.parse(mode)
    if is_mask and interpolation is Interpolation.TRILINEAR:
        raise ModeError("label masks must be resampled with nearest interpolation")

    geometry = grid.geometry
    if geometry.spacing_mm == (target_mm,) * 3:
        return grid

    dims = output_dims(geometry.dims, geometry.spacing_mm, target_mm)
    data = grid.labels if is_mask else grid.data
    if interpolation is Interpolation.TRILINEAR:
        result = data.astype(np.float64)
        for axis in range(3):
            coords = _source_coords(dims[axis], geometry.dims[axis], geometry.spacing_mm[axis], target_mm)
            result = _linear_axis(result, axis, coords)
        if data.size:
            # a + (b - a) * w may overshoot its endpoints by one ulp
            result = np.clip(result, data.min(), data.max())
    else:
        result = data
        for axis in range(3):
            coords = _source_coords(dims[axis], geometry.dims[axis], geometry.spacing_mm[axis], target_mm)
            result = _nearest_axis(result, axis, coords)

    new_geometry = _resampled_geometry(geometry, dims, target_mm)
    logger.debug(
        "resampled %s -> %s (%s, spacing %s -> %g)",
        geometry.dims,
        dims,
        interpolation.value,
        geometry.spacing_mm,
        target_mm,
    )
    if is_mask:
        return LabelMask(geometry=new_geometry, labels=result)
    return VoxelGrid(geometry=new_geometry, data=result)


def zscore_normalize(grid: VoxelGrid) -> VoxelGrid:
    """
    Normalize to zero mean and unit population standard deviation over all voxels.

    Volumes whose standard deviation is below 1e-8 become all zeros. The
    geometry passes through unchanged.
    """
    data = grid.data.astype(np.float64)
    mean = float(data.mean())
    std = float(data.std())
    if std < ZSCORE_MIN_STD:
        logger.debug("near-constant volume (std=%g), output is all zeros", std)
        return grid.with_data(np.zeros_like(data))
    return grid.with_data((data - mean) / std)


def preprocess_image(
    grid: VoxelGrid,
    target_mm: float = DEFAULT_TARGET_MM,
    mode: str | Interpolation = Interpolation.TRILINEAR,
) -> VoxelGrid:
    """Resample to cubic ``target_mm`` spacing, then z-score normalize."""
    resampled = resample_isotropic(grid, target_mm, mode)
    assert isinstance(resampled, VoxelGrid)
    return zscore_normalize(resampled)
