"""Tests for per-case evaluation, aggregation and subgroup reports."""

import math
import random

import numpy as np
import pytest

from lesionbench.core import CaseMeta, LabelMask, Sex
from lesionbench.errors import JoinError, ParameterError, ShapeMismatchError
from lesionbench.evaluation import (
    AggregationPolicy,
    CaseResult,
    SubgroupAxis,
    SubgroupSpec,
    SummaryRow,
    aggregate,
    evaluate_case,
    fold_average,
    round_half_away,
    sex_breakdown_rows,
    subgroup_report,
)
from lesionbench.metrics import MetricValue


def _result(case_id, dice, nsd=None, gt_empty=False):
    """Build a CaseResult; dice=None means both masks were empty."""
    if dice is None:
        undefined = MetricValue.undefined()
        return CaseResult(case_id, undefined, undefined, gt_empty=True, pred_empty=True)
    nsd = dice if nsd is None else nsd
    return CaseResult(
        case_id, MetricValue.of(dice), MetricValue.of(nsd), gt_empty=gt_empty, pred_empty=False
    )


def _cohort_corpus():
    results = [_result(f"m{i:03d}", 0.6402) for i in range(175)]
    results += [_result(f"f{i:03d}", 0.5885) for i in range(100)]
    metas = [CaseMeta(r.case_id, Sex.MALE if r.case_id[0] == "m" else Sex.FEMALE) for r in results]
    return results, metas


class TestEvaluateCase:
    """Tests for evaluate_case."""

    def test_identical_masks(self, cube_mask):
        mask = LabelMask.from_array(cube_mask)

        result = evaluate_case(mask, mask, 1.0, "c1")

        assert result.dice.value == 1.0
        assert result.nsd.value == 1.0
        assert (result.gt_empty, result.pred_empty) == (False, False)

    def test_both_empty(self):
        empty = LabelMask.from_array(np.zeros((4, 4, 4), dtype=np.uint8))

        result = evaluate_case(empty, empty, 1.0, "c2")

        assert not result.dice.is_defined
        assert not result.nsd.is_defined
        assert (result.gt_empty, result.pred_empty) == (True, True)

    def test_prediction_on_empty_ground_truth(self):
        gt = LabelMask.from_array(np.zeros((4, 4, 4), dtype=np.uint8))
        labels = np.zeros((4, 4, 4), dtype=np.uint8)
        labels[2, 2, 2] = 1
        pred = LabelMask.from_array(labels)

        result = evaluate_case(gt, pred, 1.0, "c3")

        assert result.dice.value == 0.0
        assert result.nsd.value == 0.0
        assert (result.gt_empty, result.pred_empty) == (True, False)

    def test_geometry_mismatch_names_case(self):
        gt = LabelMask.from_array(np.zeros((4, 4, 4), dtype=np.uint8))
        pred = LabelMask.from_array(np.zeros((4, 4, 5), dtype=np.uint8))

        with pytest.raises(ShapeMismatchError) as exc_info:
            evaluate_case(gt, pred, 1.0, "c4")
        assert exc_info.value.case_id == "c4"

    def test_flags_must_agree_with_metrics(self):
        with pytest.raises(ParameterError, match="Undefined"):
            CaseResult("c5", MetricValue.of(1.0), MetricValue.of(1.0), True, True)


class TestAggregate:
    """Tests for aggregate and the two policies."""

    def test_policies_on_three_cases(self):
        results = [_result("a", 0.8), _result("b", None), _result("c", 0.6)]

        nan_as_one = aggregate(results, AggregationPolicy.NAN_AS_ONE)
        ignore_nan = aggregate(results, "ignore_nan")

        assert nan_as_one.n_included == 3
        assert nan_as_one.mean_dice_pct == pytest.approx(80.0)
        assert ignore_nan.n_included == 2
        assert ignore_nan.mean_dice_pct == pytest.approx(70.0)

    def test_empty_ground_truth_with_prediction_scores_zero_under_both(self):
        results = [_result("a", 0.5), _result("b", None), _result("c", 0.0, gt_empty=True)]

        assert aggregate(results, "nan_as_one").mean_dice_pct == pytest.approx(50.0)
        assert aggregate(results, "ignore_nan").mean_dice_pct == pytest.approx(25.0)

    def test_weighted_corpus(self):
        results, _ = _cohort_corpus()

        for policy in AggregationPolicy:
            row = aggregate(results, policy)
            assert row.n_included == 275
            assert row.mean_dice_pct == pytest.approx(62.14, abs=0.005)
            assert round_half_away(row.mean_dice_pct) == 62.14

    def test_all_excluded_is_an_empty_summary(self):
        row = aggregate([_result("a", None)], AggregationPolicy.IGNORE_NAN)

        assert row.is_empty
        assert row.mean_dice_pct is None
        assert row.mean_nsd_pct is None

    def test_empty_input(self):
        with pytest.raises(ParameterError):
            aggregate([], AggregationPolicy.NAN_AS_ONE)

    def test_unknown_policy(self):
        with pytest.raises(ParameterError, match="unknown policy"):
            aggregate([_result("a", 1.0)], "average")

    def test_policy_parse_accepts_dashes(self):
        assert AggregationPolicy.parse("Nan-As-One") is AggregationPolicy.NAN_AS_ONE

    def test_policies_agree_without_undefined_cases(self):
        rng = random.Random(3)
        results = [_result(f"c{i}", rng.random()) for i in range(40)]

        assert aggregate(results, "nan_as_one") == aggregate(results, "ignore_nan")

    def test_order_does_not_change_the_mean(self):
        rng = random.Random(4)
        results = [_result(f"c{i:02d}", rng.random(), rng.random()) for i in range(60)]
        shuffled = results[:]
        rng.shuffle(shuffled)

        assert aggregate(shuffled, "nan_as_one") == aggregate(results, "nan_as_one")

    def test_group_means_combine_to_overall_mean(self):
        rng = random.Random(5)
        results = [_result(f"c{i:02d}", rng.random()) for i in range(50)]
        groups = [results[:13], results[13:31], results[31:]]

        overall = aggregate(results, "ignore_nan")
        rows = [aggregate(g, "ignore_nan") for g in groups]

        combined = sum(r.n_included * r.mean_dice_pct for r in rows) / sum(r.n_included for r in rows)
        assert abs(combined - overall.mean_dice_pct) < 1e-9

    def test_summary_row_means_require_cases(self):
        with pytest.raises(ParameterError):
            SummaryRow(group="All", n_included=0, mean_dice_pct=50.0, mean_nsd_pct=50.0)


class TestFoldAverage:
    """Tests for fold_average and display rounding."""

    @pytest.mark.parametrize(
        ("folds", "expected"),
        [
            ([54.22, 53.54, 55.18, 43.09, 56.66], 52.54),
            ([58.62, 54.30, 56.36, 45.40, 56.36], 54.21),
            ([47.5] * 5, 47.5),
        ],
    )
    def test_fold_means(self, folds, expected):
        assert fold_average(folds) == expected

    def test_needs_five_folds(self):
        with pytest.raises(ParameterError, match="5 fold means"):
            fold_average([50.0, 51.0])

    @pytest.mark.parametrize(
        ("value", "expected"), [(52.535, 52.54), (-52.535, -52.54), (1.005, 1.01), (2.004, 2.0)]
    )
    def test_round_half_away(self, value, expected):
        assert round_half_away(value) == expected


class TestSubgroupSpec:
    """Tests for SubgroupSpec bins and labels."""

    def test_default_age_labels(self):
        labels = SubgroupSpec(SubgroupAxis.AGE).labels()

        assert labels[0] == "[0, 10)"
        assert labels[-2] == "[70, 80]"
        assert labels[-1] == "unknown"
        assert len(labels) == 9

    def test_default_tsi_labels(self):
        assert SubgroupSpec(SubgroupAxis.TSI).labels() == [
            "[0, 6)",
            "[6, 12)",
            "[12, 24)",
            "[24, 60)",
            "60+",
            "unknown",
        ]

    def test_last_bin_is_closed(self):
        spec = SubgroupSpec(SubgroupAxis.AGE, (0, 10, 20))

        assert spec.group_of(CaseMeta("a", age_years=20.0)) == "[10, 20]"
        assert spec.group_of(CaseMeta("b", age_years=10.0)) == "[10, 20]"
        assert spec.group_of(CaseMeta("c", age_years=9.99)) == "[0, 10)"

    def test_values_outside_the_edges_are_unknown(self):
        spec = SubgroupSpec(SubgroupAxis.AGE, (10, 20))

        assert spec.group_of(CaseMeta("a", age_years=25.0)) == "unknown"
        assert spec.group_of(CaseMeta("b")) == "unknown"

    @pytest.mark.parametrize("edges", [(10, 10, 20), (20, 10), (5,)])
    def test_edges_must_increase(self, edges):
        with pytest.raises(ParameterError):
            SubgroupSpec(SubgroupAxis.AGE, edges)

    def test_sex_takes_no_edges(self):
        with pytest.raises(ParameterError):
            SubgroupSpec(SubgroupAxis.SEX, (0, 1))

    def test_exclusion_selects_policy(self):
        assert SubgroupSpec(SubgroupAxis.SEX).policy is AggregationPolicy.IGNORE_NAN
        assert SubgroupSpec(SubgroupAxis.SEX, exclusion=False).policy is AggregationPolicy.NAN_AS_ONE


class TestSubgroupReport:
    """Tests for subgroup_report and sex_breakdown_rows."""

    def test_sex_axis_over_weighted_corpus(self):
        results, metas = _cohort_corpus()

        rows = {r.group: r for r in subgroup_report(results, metas, SubgroupSpec(SubgroupAxis.SEX))}

        assert rows["male"].n_included == 175
        assert rows["male"].mean_dice_pct == pytest.approx(64.02)
        assert rows["female"].n_included == 100
        assert rows["female"].mean_dice_pct == pytest.approx(58.85)
        assert rows["unknown"].is_empty

    def test_age_decades(self):
        results = [_result("a", 1.0), _result("b", 0.5), _result("c", 0.5)]
        metas = [
            CaseMeta("a", age_years=12.0),
            CaseMeta("b", age_years=15.0),
            CaseMeta("c", age_years=27.0),
        ]

        rows = {r.group: r for r in subgroup_report(results, metas, SubgroupSpec(SubgroupAxis.AGE))}

        assert rows["[10, 20)"].n_included == 2
        assert rows["[10, 20)"].mean_dice_pct == pytest.approx(75.0)
        assert rows["[20, 30)"].n_included == 1
        assert rows["[20, 30)"].mean_dice_pct == pytest.approx(50.0)
        assert rows["[0, 10)"].mean_dice_pct is None

    def test_missing_age_lands_in_unknown(self):
        rows = subgroup_report(
            [_result("a", 0.9)], [CaseMeta("a")], SubgroupSpec(SubgroupAxis.AGE)
        )

        assert rows[-1].group == "unknown"
        assert rows[-1].n_included == 1

    def test_exclusion_drops_empty_cases(self):
        results = [_result("a", 0.4), _result("b", None)]
        metas = [CaseMeta("a", Sex.MALE), CaseMeta("b", Sex.MALE)]

        excluded = subgroup_report(results, metas, SubgroupSpec(SubgroupAxis.SEX))
        kept = subgroup_report(results, metas, SubgroupSpec(SubgroupAxis.SEX, exclusion=False))

        assert excluded[0].n_included == 1
        assert excluded[0].mean_dice_pct == pytest.approx(40.0)
        assert kept[0].n_included == 2
        assert kept[0].mean_dice_pct == pytest.approx(70.0)

    def test_bins_partition_included_cases(self):
        rng = random.Random(8)
        results = []
        metas = []
        for i in range(80):
            dice = None if i % 7 == 0 else rng.random()
            results.append(_result(f"c{i:02d}", dice))
            age = None if i % 11 == 0 else rng.uniform(0, 95)
            metas.append(CaseMeta(f"c{i:02d}", age_years=age))
        spec = SubgroupSpec(SubgroupAxis.AGE)

        rows = subgroup_report(results, metas, spec)

        total = aggregate(results, spec.policy).n_included
        assert sum(r.n_included for r in rows) == total

    def test_missing_metadata_is_a_join_error(self):
        results = [_result("a", 1.0), _result("b", 1.0), _result("c", 1.0)]

        with pytest.raises(JoinError) as exc_info:
            subgroup_report(results, [CaseMeta("b")], SubgroupSpec(SubgroupAxis.SEX))
        assert exc_info.value.case_ids == ["a", "c"]

    def test_sex_breakdown_rows(self):
        results, metas = _cohort_corpus()

        rows = sex_breakdown_rows(results, metas, "nan_as_one")

        assert [r.group for r in rows] == ["All", "male", "female"]
        assert [round_half_away(r.mean_dice_pct) for r in rows] == [62.14, 64.02, 58.85]
        assert math.isclose(rows[0].mean_dice_pct, rows[0].mean_nsd_pct)
