"""
Core data types for lesionbench.

Volumes are immutable: every array is stored read-only and operations return
new objects. Arrays are indexed ``[i, j, k]`` with ``i`` along x, so the
flattened on-disk order (Fortran order) is x-fastest.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np

from lesionbench.errors import ParameterError, ShapeMismatchError

if TYPE_CHECKING:
    from lesionbench.ensemble import PrecisionMode

AFFINE_SPACING_TOLERANCE = 1e-4
SPACING_MATCH_TOLERANCE = 1e-4
PROBABILITY_SUM_TOLERANCE = 1e-5


def _frozen(array: np.ndarray) -> np.ndarray:
    """Return a read-only array that no caller can mutate."""
    view = array.copy() if array.flags.writeable else array.view()
    view.setflags(write=False)
    return view


@dataclass(frozen=True, eq=False)
class Geometry:
    """
    Voxel grid descriptor: dims, spacing (mm) and voxel-to-world affine.

    Attributes:
        dims: Voxel counts (nx, ny, nz), all >= 1
        spacing_mm: Voxel size in millimeters, all > 0
        affine: 4x4 voxel-index -> world-mm matrix whose first three column
            norms equal ``spacing_mm``
    """

    dims: tuple[int, int, int]
    spacing_mm: tuple[float, float, float]
    affine: np.ndarray

    def __post_init__(self) -> None:
        dims = tuple(int(d) for d in self.dims)
        spacing = tuple(float(s) for s in self.spacing_mm)
        if len(dims) != 3 or len(spacing) != 3:
            raise ParameterError(f"geometry needs 3 dims and 3 spacings, got {dims} {spacing}")
        if any(d < 1 for d in dims):
            raise ParameterError(f"all dims must be >= 1, got {dims}")
        if any(not np.isfinite(s) or s <= 0 for s in spacing):
            raise ParameterError(f"all spacing components must be > 0, got {spacing}")

        affine = np.array(self.affine, dtype=np.float64)
        if affine.shape != (4, 4):
            raise ParameterError(f"affine must be 4x4, got shape {affine.shape}")
        norms = np.linalg.norm(affine[:3, :3], axis=0)
        if not np.allclose(norms, spacing, rtol=0.0, atol=AFFINE_SPACING_TOLERANCE):
            raise ParameterError(
                f"affine column norms {norms.tolist()} do not match spacing {list(spacing)}"
            )

        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing_mm", spacing)
        object.__setattr__(self, "affine", _frozen(affine))

    @classmethod
    def from_spacing(
        cls, dims: tuple[int, int, int], spacing_mm: tuple[float, float, float]
    ) -> Geometry:
        """Geometry with a diagonal affine (axis-aligned, origin at 0)."""
        affine = np.diag([*map(float, spacing_mm), 1.0])
        return cls(dims=dims, spacing_mm=spacing_mm, affine=affine)

    @property
    def n_voxels(self) -> int:
        return int(np.prod(self.dims))

    def matches(self, other: Geometry) -> bool:
        """True when dims are equal and spacing agrees within tolerance."""
        return self.dims == other.dims and bool(
            np.allclose(
                self.spacing_mm, other.spacing_mm, rtol=0.0, atol=SPACING_MATCH_TOLERANCE
            )
        )

    def require_match(self, other: Geometry, case_id: str | None = None) -> None:
        """Raise ShapeMismatchError unless ``other`` matches this geometry."""
        if self.dims != other.dims:
            raise ShapeMismatchError(f"dims differ: {self.dims} vs {other.dims}", case_id)
        if not self.matches(other):
            raise ShapeMismatchError(
                f"spacing differs: {self.spacing_mm} vs {other.spacing_mm}", case_id
            )


def _check_shape(array: np.ndarray, geometry: Geometry, what: str) -> None:
    if array.shape != geometry.dims:
        raise ParameterError(
            f"{what} shape {array.shape} does not match geometry dims {geometry.dims}"
        )


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """A 3D scalar field over a Geometry (images and intensity volumes)."""

    geometry: Geometry
    data: np.ndarray

    def __post_init__(self) -> None:
        data = np.asarray(self.data)
        _check_shape(data, self.geometry, "data")
        object.__setattr__(self, "data", _frozen(data))

    @classmethod
    def from_array(
        cls,
        data: np.ndarray,
        spacing_mm: tuple[float, float, float] = (1.0, 1.0, 1.0),
        affine: np.ndarray | None = None,
    ) -> VoxelGrid:
        data = np.asarray(data)
        if affine is None:
            geometry = Geometry.from_spacing(data.shape, spacing_mm)
        else:
            geometry = Geometry(data.shape, spacing_mm, affine)
        return cls(geometry=geometry, data=data)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.geometry.dims

    @property
    def spacing_mm(self) -> tuple[float, float, float]:
        return self.geometry.spacing_mm

    @property
    def affine(self) -> np.ndarray:
        return self.geometry.affine

    def with_data(self, data: np.ndarray) -> VoxelGrid:
        """New grid on the same geometry."""
        return VoxelGrid(geometry=self.geometry, data=data)


@dataclass(frozen=True, eq=False)
class LabelMask:
    """
    Per-voxel non-negative integer labels over a Geometry (0 = background).

    Any nonzero label counts as lesion foreground.
    """

    geometry: Geometry
    labels: np.ndarray

    def __post_init__(self) -> None:
        labels = np.asarray(self.labels)
        if labels.dtype == np.bool_:
            labels = labels.astype(np.uint8)
        if not np.issubdtype(labels.dtype, np.integer):
            raise ParameterError(f"labels must be integer typed, got {labels.dtype}")
        _check_shape(labels, self.geometry, "labels")
        if labels.size and labels.min() < 0:
            raise ParameterError("labels must be non-negative")
        object.__setattr__(self, "labels", _frozen(labels))

    @classmethod
    def from_array(
        cls,
        labels: np.ndarray,
        spacing_mm: tuple[float, float, float] = (1.0, 1.0, 1.0),
        affine: np.ndarray | None = None,
    ) -> LabelMask:
        labels = np.asarray(labels)
        if affine is None:
            geometry = Geometry.from_spacing(labels.shape, spacing_mm)
        else:
            geometry = Geometry(labels.shape, spacing_mm, affine)
        return cls(geometry=geometry, labels=labels)

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.geometry.dims

    @property
    def spacing_mm(self) -> tuple[float, float, float]:
        return self.geometry.spacing_mm

    @property
    def affine(self) -> np.ndarray:
        return self.geometry.affine

    @property
    def foreground(self) -> np.ndarray:
        """Boolean lesion mask (any nonzero label)."""
        return self.labels != 0

    @property
    def label_set(self) -> frozenset[int]:
        return frozenset(int(v) for v in np.unique(self.labels))

    def is_empty(self) -> bool:
        return not bool(self.labels.any())


@dataclass(frozen=True, eq=False)
class ProbabilityStack:
    """
    Per-class probability maps over one Geometry.

    ``probs`` has shape ``(C, nx, ny, nz)``; each voxel's class vector sums to 1
    within ``sum_tolerance`` and every entry lies in [0, 1].

    Attributes:
        geometry: Shared voxel grid
        probs: Class-first float array
        precision: Precision mode used to produce the stack (None for model outputs)
        sum_tolerance: Allowed deviation of class sums from 1
    """

    geometry: Geometry
    probs: np.ndarray
    precision: PrecisionMode | None = None
    sum_tolerance: float = PROBABILITY_SUM_TOLERANCE

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 4 or probs.shape[1:] != self.geometry.dims:
            raise ParameterError(
                f"probs shape {probs.shape} must be (C, *{self.geometry.dims})"
            )
        if probs.shape[0] < 2:
            raise ParameterError(f"a probability stack needs >= 2 classes, got {probs.shape[0]}")
        if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
            raise ParameterError("probabilities must lie in [0, 1]")
        deviation = np.abs(probs.sum(axis=0) - 1.0)
        if deviation.size and deviation.max() > self.sum_tolerance:
            raise ParameterError(
                f"class probabilities must sum to 1 (max deviation {deviation.max():.3g} "
                f"> {self.sum_tolerance:g})"
            )
        object.__setattr__(self, "probs", _frozen(probs))

    @property
    def classes(self) -> int:
        return int(self.probs.shape[0])


class Sex(Enum):
    """Sex as recorded in the demographic table."""

    MALE = "male"
    FEMALE = "female"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class CaseMeta:
    """Demographic record used for subgroup stratification."""

    case_id: str
    sex: Sex = Sex.UNKNOWN
    age_years: float | None = None
    tsi_months: float | None = None
    cohort: str = ""

    def __post_init__(self) -> None:
        if not self.case_id:
            raise ParameterError("case_id must be non-empty")
        for name in ("age_years", "tsi_months"):
            value = getattr(self, name)
            if value is not None and (not np.isfinite(value) or value < 0):
                raise ParameterError(f"{name} must be a non-negative number, got {value}")
