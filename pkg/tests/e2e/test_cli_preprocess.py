"""End-to-end tests for the preprocess command."""

import json

import numpy as np
import pytest

from lesionbench.cli import run_preprocess
from lesionbench.volume_io import read_image, read_mask


@pytest.fixture
def image_dir(tmp_path, write_image):
    directory = tmp_path / "images"
    directory.mkdir()
    rng = np.random.default_rng(21)
    for name in ("c1", "c2", "c3"):
        write_image(directory / f"{name}.nii.gz", rng.random((4, 5, 3)) * 500, (2.0, 1.2, 3.0))
    return directory


def test_images_are_resampled_then_normalized(console, image_dir, tmp_path):
    out_dir = tmp_path / "prep"

    code = run_preprocess(console, [str(image_dir), str(out_dir)])

    assert code == 0
    grid = read_image(out_dir / "c1.nii.gz")
    assert grid.dims == (8, 6, 9)
    assert grid.spacing_mm == pytest.approx((1.0, 1.0, 1.0))
    assert abs(float(grid.data.mean())) < 1e-4
    assert float(grid.data.std()) == pytest.approx(1.0, abs=1e-4)

    record = json.loads((out_dir / "preprocess.json").read_text())
    assert record["order"] == "resample>zscore"
    assert record["interpolation"] == "trilinear"
    assert record["files"] == ["c1.nii.gz", "c2.nii.gz", "c3.nii.gz"]
    assert not (out_dir / "failures.json").exists()


def test_label_masks_use_nearest(console, tmp_path, write_mask):
    in_dir = tmp_path / "labels"
    in_dir.mkdir()
    labels = np.random.default_rng(22).integers(0, 3, size=(5, 4, 3))
    write_mask(in_dir / "c1.nii.gz", labels, (2.0, 2.0, 2.0))
    out_dir = tmp_path / "prep"

    code = run_preprocess(console, [str(in_dir), str(out_dir), "--labels"])

    assert code == 0
    mask = read_mask(out_dir / "c1.nii.gz")
    assert mask.dims == (10, 8, 6)
    assert mask.labels.dtype == np.uint8
    assert mask.label_set <= {0, 1, 2}
    assert json.loads((out_dir / "preprocess.json").read_text())["order"] == "resample"


def test_labels_with_trilinear_is_a_usage_error(console, image_dir, tmp_path):
    code = run_preprocess(console, [str(image_dir), str(tmp_path / "o"), "--labels", "--mode", "trilinear"])

    assert code == 1
    assert "nearest" in console.file.getvalue()


def test_missing_input_directory(console, tmp_path):
    assert run_preprocess(console, [str(tmp_path / "absent"), str(tmp_path / "o")]) == 1


def test_empty_input_directory(console, tmp_path):
    (tmp_path / "empty").mkdir()

    assert run_preprocess(console, [str(tmp_path / "empty"), str(tmp_path / "o")]) == 1


def test_unknown_flag(console, image_dir, tmp_path):
    assert run_preprocess(console, [str(image_dir), str(tmp_path / "o"), "--bogus"]) == 1


def test_corrupt_file_is_recorded_and_others_continue(console, image_dir, tmp_path):
    (image_dir / "broken.nii").write_bytes(b"\x00" * 40)
    out_dir = tmp_path / "prep"

    code = run_preprocess(console, [str(image_dir), str(out_dir)])

    assert code == 2
    manifest = json.loads((out_dir / "failures.json").read_text())
    assert [f["item"] for f in manifest["failures"]] == ["broken.nii"]
    assert manifest["failures"][0]["category"] == "format"
    assert (out_dir / "c3.nii.gz").exists()
    assert "broken.nii" not in json.loads((out_dir / "preprocess.json").read_text())["files"]


def test_parallel_output_matches_serial(console, image_dir, tmp_path):
    run_preprocess(console, [str(image_dir), str(tmp_path / "serial"), "--jobs", "1"])
    run_preprocess(console, [str(image_dir), str(tmp_path / "parallel"), "--jobs", "3"])

    for name in ("c1.nii.gz", "c2.nii.gz", "c3.nii.gz"):
        serial = read_image(tmp_path / "serial" / name).data
        parallel = read_image(tmp_path / "parallel" / name).data
        assert np.array_equal(serial, parallel)


def test_target_spacing_from_config_file(console, image_dir, tmp_path):
    config = tmp_path / "lesionbench.yaml"
    config.write_text("target_mm: 2.0\n")
    out_dir = tmp_path / "prep"

    code = run_preprocess(console, [str(image_dir), str(out_dir), "--config", str(config)])

    assert code == 0
    assert read_image(out_dir / "c2.nii.gz").dims == (4, 3, 5)
