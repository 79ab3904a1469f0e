"""Shared fixtures for building volumes on disk."""

from __future__ import annotations

import struct
from collections.abc import Callable
from pathlib import Path

import numpy as np
import pytest

from lesionbench.core import LabelMask, ProbabilityStack, VoxelGrid
from lesionbench.volume_io import write_nifti, write_probability_stack


def nifti1_header_bytes(
    dims: tuple[int, ...],
    datatype: int,
    bitpix: int,
    pixdim: tuple[float, ...] = (1.0, 1.0, 1.0),
    endianness: str = "<",
    magic: bytes = b"n+1\x00",
    sizeof_hdr: int = 348,
    scl_slope: float = 0.0,
    scl_inter: float = 0.0,
) -> bytes:
    """A NIfTI-1 header packed field by field, plus the 4-byte extension flag."""
    header = bytearray(352)
    struct.pack_into(f"{endianness}i", header, 0, sizeof_hdr)
    dim = [len(dims), *dims] + [1] * (7 - len(dims))
    struct.pack_into(f"{endianness}8h", header, 40, *dim)
    struct.pack_into(f"{endianness}hh", header, 70, datatype, bitpix)
    pix = [1.0, *pixdim] + [1.0] * (7 - len(pixdim))
    struct.pack_into(f"{endianness}8f", header, 76, *pix)
    struct.pack_into(f"{endianness}fff", header, 108, 352.0, scl_slope, scl_inter)
    header[344:348] = magic
    return bytes(header)


@pytest.fixture
def write_mask() -> Callable[..., Path]:
    """Write a label array as a NIfTI mask and return its path."""

    def _write(
        path: Path, labels: np.ndarray, spacing_mm: tuple[float, float, float] = (1.0, 1.0, 1.0)
    ) -> Path:
        write_nifti(LabelMask.from_array(np.asarray(labels, dtype=np.uint8), spacing_mm), path)
        return path

    return _write


@pytest.fixture
def write_image() -> Callable[..., Path]:
    """Write a float array as a NIfTI image and return its path."""

    def _write(
        path: Path, data: np.ndarray, spacing_mm: tuple[float, float, float] = (1.0, 1.0, 1.0)
    ) -> Path:
        write_nifti(VoxelGrid.from_array(np.asarray(data, dtype=np.float32), spacing_mm), path)
        return path

    return _write


@pytest.fixture
def write_probs() -> Callable[..., Path]:
    """Write a (C, nx, ny, nz) probability array as a 4D NIfTI file."""

    def _write(path: Path, probs: np.ndarray) -> Path:
        probs = np.asarray(probs, dtype=np.float64)
        grid = VoxelGrid.from_array(np.zeros(probs.shape[1:]))
        write_probability_stack(ProbabilityStack(geometry=grid.geometry, probs=probs), path)
        return path

    return _write


@pytest.fixture
def cube_mask() -> np.ndarray:
    """8x8x8 volume with a 3x3x3 lesion cube at [2:5, 2:5, 2:5]."""
    labels = np.zeros((8, 8, 8), dtype=np.uint8)
    labels[2:5, 2:5, 2:5] = 1
    return labels
