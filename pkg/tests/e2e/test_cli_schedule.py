"""End-to-end tests for the schedule and folds commands."""

import io
import json

import pandas as pd
import pytest

from lesionbench.cli import run_folds, run_schedule


def _stdout_frame(capsys):
    return pd.read_csv(io.StringIO(capsys.readouterr().out), float_precision="round_trip")


class TestSamplingPlans:
    """Tests for schedule sampling-plan output."""

    def test_sizes_to_probabilities(self, console, capsys):
        code = run_schedule(console, ["--sizes", "20,80,180"])

        frame = _stdout_frame(capsys)
        assert code == 0
        assert frame.columns.tolist() == ["dataset", "count", "probability"]
        assert frame["count"].tolist() == [20, 80, 180]
        for got, expected in zip(frame["probability"], (6 / 11, 3 / 11, 2 / 11)):
            assert abs(got - expected) < 1e-12

    def test_draws_are_seeded(self, console, capsys):
        run_schedule(console, ["--sizes", "20,80,180", "--draws", "1000", "--seed", "3"])
        first = _stdout_frame(capsys)
        run_schedule(console, ["--sizes", "20,80,180", "--draws", "1000", "--seed", "3"])
        second = _stdout_frame(capsys)

        assert first["drawn"].sum() == 1000
        assert first.equals(second)

    def test_sizes_from_csv(self, console, capsys, tmp_path):
        sizes = tmp_path / "sizes.csv"
        sizes.write_text("dataset,count\nBTCV,30\nLIDC,1010\n")

        run_schedule(console, ["--sizes-csv", str(sizes)])

        assert _stdout_frame(capsys)["dataset"].tolist() == ["BTCV", "LIDC"]

    def test_pretraining_collection(self, console, capsys):
        run_schedule(console, ["--pretraining"])

        frame = _stdout_frame(capsys)
        assert len(frame) == 47
        assert frame["probability"].sum() == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("sizes", ["20,x", "20,0", ""])
    def test_bad_sizes(self, console, sizes):
        assert run_schedule(console, ["--sizes", sizes]) == 1


class TestLearningRates:
    """Tests for schedule learning-rate output."""

    def test_poly_table(self, console, capsys):
        run_schedule(console, ["--poly", "--epochs", "10"])

        frame = _stdout_frame(capsys)
        assert frame["epoch"].tolist() == list(range(10))
        assert frame["lr"].iloc[0] == 0.01
        assert frame["lr"].is_monotonic_decreasing

    def test_warmup_table_with_sidecar(self, console, tmp_path):
        out = tmp_path / "lr.csv"

        code = run_schedule(
            console, ["--warmup", "50", "--target", "0.001", "--epochs", "1000", "--out", str(out)]
        )

        assert code == 0
        frame = pd.read_csv(out, float_precision="round_trip")
        assert len(frame) == 1000
        assert frame["lr"].iloc[49] == pytest.approx(0.001)
        assert frame["lr"].iloc[50] == 0.001
        meta = json.loads(out.with_suffix(".json").read_text())
        assert meta["warmup_ramp"] == "target*(epoch+1)/warmup_epochs"
        assert meta["training"]["batch_size"] == 24
        assert "warmup_then_poly" in console.file.getvalue()

    def test_preset(self, console, capsys):
        run_schedule(console, ["--preset", "warmup_lr0.01", "--epochs", "100"])

        frame = _stdout_frame(capsys)
        assert frame["lr"].iloc[0] == pytest.approx(0.01 / 50)

    def test_exponent_from_config(self, console, capsys, tmp_path):
        config = tmp_path / "lesionbench.yaml"
        config.write_text("poly_exponent: 2.0\n")

        run_schedule(console, ["--poly", "--epochs", "4", "--config", str(config)])

        assert _stdout_frame(capsys)["lr"].iloc[2] == pytest.approx(0.01 * 0.25)


@pytest.mark.parametrize(
    "args", [[], ["--sizes", "1,2", "--poly"], ["--poly", "--warmup", "5"], ["--warmup", "0"]]
)
def test_schedule_usage_errors(console, args):
    assert run_schedule(console, args) == 1


class TestFolds:
    """Tests for the folds command."""

    def test_388_ids(self, console, capsys, tmp_path):
        ids = tmp_path / "ids.txt"
        ids.write_text("\n".join(f"case_{i:03d}" for i in range(388)) + "\n")

        code = run_folds(console, ["--ids", str(ids), "--seed", "1"])

        splits = json.loads(capsys.readouterr().out)
        assert code == 0
        assert sorted(len(s["val"]) for s in splits) == [77, 77, 78, 78, 78]
        assert all(len(s["train"]) + len(s["val"]) == 388 for s in splits)

    def test_same_seed_same_splits(self, console, tmp_path):
        ids = tmp_path / "ids.txt"
        ids.write_text("\n".join(f"c{i}" for i in range(23)))

        run_folds(console, ["--ids", str(ids), "--seed", "9", "--out", str(tmp_path / "a.json")])
        run_folds(console, ["--ids", str(ids), "--seed", "9", "--out", str(tmp_path / "b.json")])

        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()

    def test_ids_from_directory(self, console, capsys, tmp_path, write_mask, cube_mask):
        for name in ("a", "b", "c", "d"):
            write_mask(tmp_path / f"{name}.nii.gz", cube_mask)

        run_folds(console, ["--dir", str(tmp_path), "--k", "2"])

        splits = json.loads(capsys.readouterr().out)
        assert sorted(splits[0]["val"] + splits[1]["val"]) == ["a", "b", "c", "d"]

    def test_more_folds_than_cases(self, console, tmp_path):
        ids = tmp_path / "ids.txt"
        ids.write_text("a\nb\n")

        assert run_folds(console, ["--ids", str(ids)]) == 1

    def test_source_is_required(self, console):
        assert run_folds(console, []) == 1
