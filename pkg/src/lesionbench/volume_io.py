"""
NIfTI-1 volume reader and writer.

Reads single-file NIfTI-1 (``.nii`` / ``.nii.gz``) into VoxelGrid, LabelMask and
ProbabilityStack objects and writes them back bit-exactly. Header parsing and
data layout go through nibabel; validation is stricter than nibabel's own
``check_fix`` so that spacing is never silently rewritten.
"""

from __future__ import annotations

import gzip
import logging
import os
import zlib
from pathlib import Path

import nibabel as nib
import numpy as np
from nibabel.openers import ImageOpener

from lesionbench.core import (
    PROBABILITY_SUM_TOLERANCE,
    Geometry,
    LabelMask,
    ProbabilityStack,
    VoxelGrid,
)
from lesionbench.errors import (
    ParameterError,
    TruncatedVolumeError,
    UnsupportedDatatypeError,
    VolumeFormatError,
)

logger = logging.getLogger(__name__)

NIFTI1_HEADER_SIZE = 348
NIFTI2_HEADER_SIZE = 540
NIFTI_SUFFIXES = (".nii", ".nii.gz")

# NIfTI datatype code -> numpy dtype (uint8, int16, float32)
SUPPORTED_DATATYPES: dict[int, type[np.generic]] = {
    2: np.uint8,
    4: np.int16,
    16: np.float32,
}


def is_nifti_path(path: str | Path) -> bool:
    """True for ``.nii`` and ``.nii.gz`` file names."""
    return str(path).lower().endswith(NIFTI_SUFFIXES)


def case_stem(path: str | Path) -> str:
    """Case identifier of a file: everything before the first dot."""
    return Path(path).name.split(".", 1)[0]


def list_volumes(directory: str | Path) -> list[Path]:
    """NIfTI files directly inside ``directory``, sorted by name."""
    return sorted(p for p in Path(directory).iterdir() if p.is_file() and is_nifti_path(p))


def _guess_endianness(raw: bytes, path: Path) -> str:
    """Byte order decided by dim[0] lying in [1, 7]."""
    for order in ("<", ">"):
        dim0 = int(np.frombuffer(raw, dtype=f"{order}i2", count=1, offset=40)[0])
        if 1 <= dim0 <= 7:
            return order
    raise VolumeFormatError("dim[0] is outside [1, 7] in both byte orders", path)


def _read_header(fobj, path: Path) -> nib.Nifti1Header:
    raw = fobj.read(NIFTI1_HEADER_SIZE)
    if len(raw) < NIFTI1_HEADER_SIZE:
        raise TruncatedVolumeError(
            f"header has {len(raw)} bytes, expected {NIFTI1_HEADER_SIZE}", path
        )

    sizes = {int(np.frombuffer(raw, dtype=f"{o}i4", count=1)[0]) for o in ("<", ">")}
    if NIFTI2_HEADER_SIZE in sizes:
        raise VolumeFormatError("NIfTI-2 files are not supported", path)
    if NIFTI1_HEADER_SIZE not in sizes:
        raise VolumeFormatError("sizeof_hdr is not 348", path)

    endianness = _guess_endianness(raw, path)
    header = nib.Nifti1Header(raw, endianness=endianness, check=False)

    magic = bytes(header["magic"].item())
    if magic == b"ni1":
        raise VolumeFormatError("separate .hdr/.img pairs are not supported", path)
    if magic != b"n+1":
        raise VolumeFormatError(f"bad magic {magic!r}, expected b'n+1'", path)
    return header


def _validated_shape(header: nib.Nifti1Header, path: Path, max_dims: int) -> tuple[int, ...]:
    dim = [int(d) for d in header["dim"]]
    ndim = dim[0]
    shape = dim[1 : ndim + 1]
    if any(n < 1 for n in shape):
        raise VolumeFormatError(f"non-positive dimension in {shape}", path)
    # Trailing singleton dimensions are dropped
    while len(shape) > max_dims and shape[-1] == 1:
        shape.pop()
    if len(shape) > max_dims:
        raise VolumeFormatError(f"expected at most {max_dims} dimensions, got {shape}", path)
    return tuple(shape) + (1,) * (3 - len(shape))


def _validated_spacing(header: nib.Nifti1Header, path: Path) -> tuple[float, float, float]:
    pixdim = [float(p) for p in header["pixdim"][1:4]]
    if any(not np.isfinite(p) or p <= 0 for p in pixdim):
        raise VolumeFormatError(f"pixdim[1..3] must be positive, got {pixdim}", path)
    return (pixdim[0], pixdim[1], pixdim[2])


def _header_affine(header: nib.Nifti1Header, spacing: tuple[float, float, float]) -> np.ndarray:
    if int(header["sform_code"]) > 0:
        return header.get_sform()
    if int(header["qform_code"]) > 0:
        return header.get_qform()
    return np.diag([*spacing, 1.0])


def _scale(data: np.ndarray, header: nib.Nifti1Header) -> np.ndarray:
    slope = float(header["scl_slope"])
    inter = float(header["scl_inter"])
    if slope == 0 or not np.isfinite(slope):
        return data
    if not np.isfinite(inter):
        inter = 0.0
    if (slope, inter) == (1.0, 0.0):
        return data
    return data.astype(np.float64) * slope + inter


def _read_volume(path: str | Path, max_dims: int) -> tuple[np.ndarray, Geometry]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"No such volume: {path}")
    name = path.name.lower()
    if name.endswith((".hdr", ".img", ".hdr.gz", ".img.gz")):
        raise VolumeFormatError("separate .hdr/.img pairs are not supported", path)
    if not is_nifti_path(path):
        raise VolumeFormatError("expected a .nii or .nii.gz file", path)

    with ImageOpener(path, "rb") as fobj:
        try:
            header = _read_header(fobj, path)
        except (gzip.BadGzipFile, zlib.error) as e:
            raise VolumeFormatError(f"not a readable gzip stream ({e})", path) from e
        code = int(header["datatype"])
        if code not in SUPPORTED_DATATYPES:
            raise UnsupportedDatatypeError(
                f"datatype code {code} is not one of {sorted(SUPPORTED_DATATYPES)}", path
            )
        shape = _validated_shape(header, path, max_dims)
        spacing = _validated_spacing(header, path)
        if header.get_data_offset() < NIFTI1_HEADER_SIZE:
            raise VolumeFormatError(f"vox_offset {header.get_data_offset()} overlaps the header", path)
        try:
            raw = header.raw_data_from_fileobj(fobj)
        except (gzip.BadGzipFile, zlib.error) as e:
            raise VolumeFormatError(f"corrupt compressed data ({e})", path) from e
        except (OSError, EOFError) as e:
            raise TruncatedVolumeError(f"data shorter than header announces ({e})", path) from e

    data = np.asarray(raw).reshape(shape, order="F")
    if not data.dtype.isnative:
        data = data.astype(data.dtype.newbyteorder("="))
    data = _scale(data, header)
    try:
        geometry = Geometry(
            dims=data.shape[:3], spacing_mm=spacing, affine=_header_affine(header, spacing)
        )
    except ParameterError as e:
        raise VolumeFormatError(f"inconsistent header geometry: {e}", path) from e
    logger.debug("read %s dims=%s spacing=%s dtype=%s", path.name, data.shape, spacing, data.dtype)
    return data, geometry


def read_nifti(path: str | Path, as_mask: bool = False) -> VoxelGrid | LabelMask:
    """
    Read a 3D NIfTI-1 volume.

    Args:
        path: ``.nii`` or ``.nii.gz`` file
        as_mask: Return a LabelMask (integer-typed, unscaled files only)

    Returns:
        VoxelGrid, or LabelMask when ``as_mask`` is set

    Raises:
        FileNotFoundError: If the file does not exist
        VolumeFormatError: Bad magic, NIfTI-2, pairs, bad dims or pixdim
        UnsupportedDatatypeError: Datatype outside uint8/int16/float32
        TruncatedVolumeError: Header or data shorter than announced
    """
    data, geometry = _read_volume(path, max_dims=3)
    if not as_mask:
        return VoxelGrid(geometry=geometry, data=data)
    if not np.issubdtype(data.dtype, np.integer):
        raise UnsupportedDatatypeError(
            f"{data.dtype} data cannot be read as a label mask", path
        )
    try:
        return LabelMask(geometry=geometry, labels=data)
    except ParameterError as e:
        raise VolumeFormatError(f"invalid label mask: {e}", path) from e


def read_image(path: str | Path) -> VoxelGrid:
    """Read an intensity volume."""
    grid = read_nifti(path, as_mask=False)
    assert isinstance(grid, VoxelGrid)
    return grid


def read_mask(path: str | Path) -> LabelMask:
    """Read an integer label volume."""
    mask = read_nifti(path, as_mask=True)
    assert isinstance(mask, LabelMask)
    return mask


def read_probability_stack(
    path: str | Path, sum_tolerance: float = PROBABILITY_SUM_TOLERANCE
) -> ProbabilityStack:
    """
    Read a 4D (nx, ny, nz, C) probability file; classes end up on the first axis.

    Stacks written by a half-precision ensemble only sum to 1 within
    ``PrecisionMode.HALF.sum_tolerance``; the ensemble command records that value
    in ``ensemble.json`` next to them and passes it here when reading them back.
    """
    data, geometry = _read_volume(path, max_dims=4)
    if data.ndim != 4:
        raise VolumeFormatError(f"expected a 4D probability volume, got shape {data.shape}", path)
    probs = np.moveaxis(data.astype(np.float64), -1, 0)
    try:
        return ProbabilityStack(geometry=geometry, probs=probs, sum_tolerance=sum_tolerance)
    except ParameterError as e:
        raise VolumeFormatError(f"invalid probability stack: {e}", path) from e


def _storage_array(volume: VoxelGrid | LabelMask) -> np.ndarray:
    """Cast to one of the supported on-disk datatypes."""
    if isinstance(volume, LabelMask):
        labels = volume.labels
        top = int(labels.max()) if labels.size else 0
        if top <= np.iinfo(np.uint8).max:
            return labels.astype(np.uint8)
        if top <= np.iinfo(np.int16).max:
            logger.debug("label %d exceeds uint8, storing mask as int16", top)
            return labels.astype(np.int16)
        raise ParameterError(f"label {top} does not fit a supported datatype")

    data = volume.data
    if data.dtype in (np.uint8, np.int16, np.float32):
        return data
    if data.dtype == np.bool_:
        return data.astype(np.uint8)
    if np.issubdtype(data.dtype, np.integer):
        low, high = (int(data.min()), int(data.max())) if data.size else (0, 0)
        if low >= 0 and high <= np.iinfo(np.uint8).max:
            return data.astype(np.uint8)
        if np.iinfo(np.int16).min <= low and high <= np.iinfo(np.int16).max:
            return data.astype(np.int16)
        raise ParameterError(f"integer range [{low}, {high}] does not fit int16")
    return data.astype(np.float32)


def _save(data: np.ndarray, geometry: Geometry, path: Path, endianness: str) -> None:
    header = nib.Nifti1Header(endianness=endianness)
    header.set_data_dtype(data.dtype)
    image = nib.Nifti1Image(data, geometry.affine, header=header)
    image.header.set_zooms(geometry.spacing_mm + (1.0,) * (data.ndim - 3))
    image.set_sform(geometry.affine, code=1)
    image.set_qform(geometry.affine, code=1)

    # Write to a sibling temp file and rename so readers never see partial files
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp_path = path.with_name(f".tmp-{os.getpid()}-{path.name}")
    try:
        nib.save(image, tmp_path)
        os.replace(tmp_path, path)
    finally:
        tmp_path.unlink(missing_ok=True)


def write_nifti(volume: VoxelGrid | LabelMask, path: str | Path, endianness: str = "<") -> None:
    """
    Write a VoxelGrid or LabelMask as NIfTI-1 (gzip when the name ends in .gz).

    Masks are stored as uint8 when the largest label fits, otherwise int16.
    Float grids are stored as float32.

    Args:
        volume: Grid or mask to write
        path: Destination ``.nii`` / ``.nii.gz``
        endianness: ``"<"`` (little) or ``">"`` (big)

    Raises:
        OSError: If the destination is not writable
        ParameterError: If the data does not fit a supported datatype
    """
    path = Path(path)
    if not is_nifti_path(path):
        raise ParameterError(f"output must end in .nii or .nii.gz: {path}")
    if endianness not in ("<", ">"):
        raise ParameterError(f"endianness must be '<' or '>', got {endianness!r}")
    _save(_storage_array(volume), volume.geometry, path, endianness)


def write_probability_stack(
    stack: ProbabilityStack, path: str | Path, endianness: str = "<"
) -> None:
    """Write a stack as a 4D float32 volume with the class axis last."""
    path = Path(path)
    if not is_nifti_path(path):
        raise ParameterError(f"output must end in .nii or .nii.gz: {path}")
    data = np.moveaxis(stack.probs, 0, -1).astype(np.float32)
    _save(np.ascontiguousarray(data), stack.geometry, path, endianness)
