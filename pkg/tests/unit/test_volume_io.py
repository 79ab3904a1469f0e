"""Tests for the NIfTI-1 reader and writer."""

import gzip

import numpy as np
import pytest

from lesionbench.core import LabelMask, ProbabilityStack, VoxelGrid
from lesionbench.errors import (
    ErrorCategory,
    ParameterError,
    TruncatedVolumeError,
    UnsupportedDatatypeError,
    VolumeFormatError,
    classify_error,
)
from lesionbench.volume_io import (
    case_stem,
    is_nifti_path,
    list_volumes,
    read_image,
    read_mask,
    read_nifti,
    read_probability_stack,
    write_nifti,
    write_probability_stack,
)
from tests.conftest import nifti1_header_bytes

UINT8 = (2, 8)
INT16 = (4, 16)
FLOAT64 = (64, 64)


def _minimal_uint8_file(path, **header_kwargs):
    header = nifti1_header_bytes((2, 2, 2), *UINT8, **header_kwargs)
    path.write_bytes(header + bytes(range(8)))
    return path


class TestReadNifti:
    """Tests for reading hand-packed NIfTI-1 files."""

    def test_minimal_uint8_volume(self, tmp_path):
        path = _minimal_uint8_file(tmp_path / "c1.nii")

        grid = read_nifti(path)

        assert isinstance(grid, VoxelGrid)
        assert grid.dims == (2, 2, 2)
        assert grid.spacing_mm == (1.0, 1.0, 1.0)
        assert grid.data.dtype == np.uint8
        # x varies fastest on disk
        assert grid.data[1, 0, 0] == 1
        assert grid.data[0, 1, 0] == 2
        assert grid.data[0, 0, 1] == 4
        assert grid.data.flatten(order="F").tolist() == list(range(8))

    def test_gzip_is_transparent(self, tmp_path):
        plain = _minimal_uint8_file(tmp_path / "c1.nii")
        packed = tmp_path / "c1.nii.gz"
        packed.write_bytes(gzip.compress(plain.read_bytes()))

        assert np.array_equal(read_nifti(packed).data, read_nifti(plain).data)

    def test_big_endian_header(self, tmp_path):
        header = nifti1_header_bytes((2, 1, 1), *INT16, pixdim=(0.5, 1.0, 2.0), endianness=">")
        path = tmp_path / "be.nii"
        path.write_bytes(header + np.array([300, -2], dtype=">i2").tobytes())

        grid = read_image(path)

        assert grid.data.tolist() == [[[300]], [[-2]]]
        assert grid.data.dtype.isnative
        assert grid.spacing_mm == (0.5, 1.0, 2.0)

    def test_scale_slope_and_intercept_are_applied(self, tmp_path):
        path = _minimal_uint8_file(tmp_path / "scaled.nii", scl_slope=2.0, scl_inter=1.0)

        grid = read_image(path)

        assert grid.data.flatten(order="F").tolist() == [1.0, 3.0, 5.0, 7.0, 9.0, 11.0, 13.0, 15.0]

    def test_bad_magic(self, tmp_path):
        path = _minimal_uint8_file(tmp_path / "bad.nii", magic=b"xyz\x00")

        with pytest.raises(VolumeFormatError, match="bad magic"):
            read_nifti(path)

    def test_header_pair_magic_is_rejected(self, tmp_path):
        path = _minimal_uint8_file(tmp_path / "pair.nii", magic=b"ni1\x00")

        with pytest.raises(VolumeFormatError, match=r"\.hdr/\.img"):
            read_nifti(path)

    def test_nifti2_is_rejected(self, tmp_path):
        path = _minimal_uint8_file(tmp_path / "n2.nii", sizeof_hdr=540)

        with pytest.raises(VolumeFormatError, match="NIfTI-2"):
            read_nifti(path)

    def test_hdr_suffix_is_rejected(self, tmp_path):
        path = tmp_path / "c1.hdr"
        path.write_bytes(b"\x00" * 348)

        with pytest.raises(VolumeFormatError, match=r"\.hdr/\.img"):
            read_nifti(path)

    def test_unsupported_datatype(self, tmp_path):
        path = tmp_path / "f64.nii"
        path.write_bytes(nifti1_header_bytes((2, 2, 2), *FLOAT64) + b"\x00" * 64)

        with pytest.raises(UnsupportedDatatypeError, match="datatype code 64"):
            read_nifti(path)

    def test_truncated_data(self, tmp_path):
        path = tmp_path / "short.nii"
        path.write_bytes(nifti1_header_bytes((2, 2, 2), *UINT8) + bytes(5))

        with pytest.raises(TruncatedVolumeError):
            read_nifti(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "tiny.nii"
        path.write_bytes(nifti1_header_bytes((2, 2, 2), *UINT8)[:100])

        with pytest.raises(TruncatedVolumeError, match="header"):
            read_nifti(path)

    def test_gz_suffix_without_gzip_data(self, tmp_path):
        path = tmp_path / "plain.nii.gz"
        path.write_bytes(nifti1_header_bytes((2, 2, 2), *UINT8) + bytes(8))

        with pytest.raises(VolumeFormatError, match="gzip") as exc_info:
            read_nifti(path)

        assert classify_error(exc_info.value) is ErrorCategory.FORMAT

    def test_invalid_deflate_block_in_data(self, tmp_path):
        # A second gzip member whose first deflate block uses the reserved type 3
        bad_member = bytes.fromhex("1f8b08000000000000ff") + b"\x07" + bytes(64)
        path = tmp_path / "corrupt.nii.gz"
        path.write_bytes(gzip.compress(nifti1_header_bytes((2, 2, 2), *UINT8)) + bad_member)

        with pytest.raises(VolumeFormatError) as exc_info:
            read_nifti(path)

        assert classify_error(exc_info.value) is ErrorCategory.FORMAT

    def test_non_positive_pixdim(self, tmp_path):
        path = _minimal_uint8_file(tmp_path / "zero.nii", pixdim=(1.0, 0.0, 1.0))

        with pytest.raises(VolumeFormatError, match="pixdim"):
            read_nifti(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_nifti(tmp_path / "absent.nii.gz")

    def test_float_volume_is_not_a_mask(self, tmp_path):
        path = tmp_path / "img.nii.gz"
        write_nifti(VoxelGrid.from_array(np.full((2, 2, 2), 0.5, dtype=np.float32)), path)

        with pytest.raises(UnsupportedDatatypeError, match="label mask"):
            read_mask(path)


class TestWriteNifti:
    """Tests for writing volumes back to disk."""

    def test_uint8_round_trip_is_bit_identical(self, tmp_path):
        data = np.arange(8, dtype=np.uint8).reshape(2, 2, 2)
        path = tmp_path / "u8.nii"
        write_nifti(VoxelGrid.from_array(data), path)

        back = read_image(path)

        assert back.data.dtype == np.uint8
        assert np.array_equal(back.data, data)

    def test_int16_big_endian_gzip_round_trip(self, tmp_path):
        data = np.array([-300, 0, 5, 32767, -32768, 7, 8, 9], dtype=np.int16).reshape(2, 2, 2)
        path = tmp_path / "i16.nii.gz"
        write_nifti(VoxelGrid.from_array(data, spacing_mm=(0.8, 0.8, 3.0)), path, endianness=">")

        back = read_image(path)

        assert back.data.dtype == np.int16
        assert np.array_equal(back.data, data)
        assert back.spacing_mm == pytest.approx((0.8, 0.8, 3.0))

    def test_float_constant_round_trip_is_exact(self, tmp_path):
        path = tmp_path / "half.nii.gz"
        write_nifti(VoxelGrid.from_array(np.full((3, 3, 3), 0.5)), path)

        back = read_image(path)

        assert back.data.dtype == np.float32
        assert np.all(back.data == 0.5)

    def test_random_float32_round_trip(self, tmp_path):
        data = np.random.default_rng(3).normal(size=(4, 5, 6)).astype(np.float32)
        path = tmp_path / "f32.nii"
        write_nifti(VoxelGrid.from_array(data), path)

        assert np.array_equal(read_image(path).data, data)

    def test_large_label_is_promoted_to_int16(self, tmp_path):
        labels = np.zeros((2, 2, 2), dtype=np.int32)
        labels[1, 1, 1] = 300
        path = tmp_path / "mask.nii.gz"
        write_nifti(LabelMask.from_array(labels), path)

        back = read_mask(path)

        assert back.labels.dtype == np.int16
        assert int(back.labels[1, 1, 1]) == 300

    def test_label_out_of_range(self, tmp_path):
        labels = np.zeros((2, 2, 2), dtype=np.int32)
        labels[0, 0, 0] = 40000

        with pytest.raises(ParameterError, match="40000"):
            write_nifti(LabelMask.from_array(labels), tmp_path / "mask.nii")

    def test_affine_is_preserved(self, tmp_path):
        affine = np.diag([2.0, 1.0, 0.5, 1.0])
        affine[:3, 3] = [-10.0, 4.0, 7.5]
        grid = VoxelGrid.from_array(np.zeros((3, 3, 3), dtype=np.uint8), (2.0, 1.0, 0.5), affine)
        path = tmp_path / "moved.nii"
        write_nifti(grid, path)

        assert np.allclose(read_image(path).affine, affine, atol=1e-5)

    def test_rejects_unknown_suffix(self, tmp_path):
        with pytest.raises(ParameterError, match=".nii"):
            write_nifti(VoxelGrid.from_array(np.zeros((2, 2, 2))), tmp_path / "out.mha")

    def test_no_temp_files_left_behind(self, tmp_path):
        write_nifti(VoxelGrid.from_array(np.zeros((2, 2, 2))), tmp_path / "c1.nii.gz")

        assert [p.name for p in tmp_path.iterdir()] == ["c1.nii.gz"]


class TestProbabilityStackIO:
    """Tests for 4D probability files."""

    def test_class_axis_moves_to_front(self, tmp_path):
        probs = np.zeros((3, 2, 2, 1))
        probs[0] = 0.25
        probs[1] = 0.25
        probs[2] = 0.5
        grid = VoxelGrid.from_array(np.zeros((2, 2, 1)))
        path = tmp_path / "p.nii.gz"
        write_probability_stack(ProbabilityStack(geometry=grid.geometry, probs=probs), path)

        stack = read_probability_stack(path)

        assert stack.classes == 3
        assert stack.geometry.dims == (2, 2, 1)
        assert np.array_equal(stack.probs, probs)

    def test_3d_file_is_not_a_stack(self, tmp_path):
        path = tmp_path / "img.nii"
        write_nifti(VoxelGrid.from_array(np.zeros((2, 2, 2), dtype=np.float32)), path)

        with pytest.raises(VolumeFormatError, match="4D"):
            read_probability_stack(path)


class TestPaths:
    """Tests for file naming helpers."""

    def test_case_stem_stops_at_first_dot(self):
        assert case_stem("/data/c001.nii.gz") == "c001"
        assert case_stem("c001_0000.nii") == "c001_0000"

    def test_is_nifti_path(self):
        assert is_nifti_path("a.nii")
        assert is_nifti_path("a.NII.GZ")
        assert not is_nifti_path("a.hdr")

    def test_list_volumes_is_sorted_and_filtered(self, tmp_path):
        for name in ("b.nii.gz", "a.nii", "notes.txt"):
            (tmp_path / name).write_bytes(b"")
        (tmp_path / "sub.nii").mkdir()

        assert [p.name for p in list_volumes(tmp_path)] == ["a.nii", "b.nii.gz"]
