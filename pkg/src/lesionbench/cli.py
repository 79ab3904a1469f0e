"""
Command-line interface for lesionbench.

Subcommands: preprocess, evaluate, ensemble, schedule, folds. Every command
returns an exit code: 0 on success, 1 for usage or configuration errors and 2
when some inputs failed (a ``failures.json`` manifest is written next to the
outputs).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections import Counter
from collections.abc import Callable, Iterable
from multiprocessing import Pool
from pathlib import Path
from typing import Any, NoReturn

import pandas as pd
from rich.console import Console
from rich.logging import RichHandler

from lesionbench import __version__
from lesionbench.config import ToolkitConfig, parse_bin_edges
from lesionbench.core import PROBABILITY_SUM_TOLERANCE, CaseMeta
from lesionbench.datasets import (
    DEFAULT_FINETUNE_EPOCHS,
    FINETUNE_PRESETS,
    TRAINING_METADATA,
    finetune_schedule,
    pretraining_plan,
)
from lesionbench.display import show_sampling_plan, show_schedule, show_summaries
from lesionbench.ensemble import (
    HALF_PRECISION_WARNING,
    PrecisionMode,
    argmax_labels,
    compare_labelings,
    ensemble_probs,
)
from lesionbench.errors import (
    ExitCode,
    FailureLog,
    FailureRecord,
    LesionBenchError,
    MetadataError,
    ParameterError,
)
from lesionbench.evaluation import (
    AggregationPolicy,
    CaseResult,
    SubgroupAxis,
    SubgroupSpec,
    aggregate,
    evaluate_case,
    sex_breakdown_rows,
    subgroup_report,
)
from lesionbench.preprocess import (
    PREPROCESSING_ORDER,
    Interpolation,
    preprocess_image,
    resample_isotropic,
)
from lesionbench.report import (
    summary_payload,
    write_json,
    write_subgroup_csv,
    write_subgroup_svg,
    write_text_atomic,
)
from lesionbench.schedules import (
    LrSchedule,
    folds_to_splits,
    lr_table,
    make_folds,
    sample_sequence,
    sampling_weights,
)
from lesionbench.tables import read_dataset_sizes, read_meta_table, write_case_results
from lesionbench.timing import PerformanceMonitor
from lesionbench.volume_io import (
    case_stem,
    list_volumes,
    read_image,
    read_mask,
    read_probability_stack,
    write_nifti,
    write_probability_stack,
)

logger = logging.getLogger(__name__)

FAILURE_MANIFEST = "failures.json"
PREPROCESS_RECORD = "preprocess.json"
ENSEMBLE_RECORD = "ensemble.json"


class UsageError(LesionBenchError):
    """Bad command-line usage (exit code 1)."""


class _ArgumentParser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting with argparse's code 2."""

    def error(self, message: str) -> NoReturn:
        raise UsageError(f"{self.prog}: {message}")


def main() -> None:
    """Main CLI entry point."""
    console = Console()

    if len(sys.argv) < 2:
        show_help(console)
        sys.exit(ExitCode.SUCCESS)

    command = sys.argv[1]

    if command in ("help", "--help", "-h"):
        show_help(console)
        sys.exit(ExitCode.SUCCESS)

    if command in ("version", "--version", "-v"):
        console.print(f"lesionbench version {__version__}")
        sys.exit(ExitCode.SUCCESS)

    commands: dict[str, Callable[[Console, list[str]], int]] = {
        "preprocess": run_preprocess,
        "evaluate": run_evaluate,
        "ensemble": run_ensemble,
        "schedule": run_schedule,
        "folds": run_folds,
    }
    if command not in commands:
        console.print(f"[red]Unknown command: {command}[/red]")
        console.print("\nRun 'lesionbench help' for usage information.")
        sys.exit(ExitCode.USAGE)

    sys.exit(int(commands[command](console, sys.argv[2:])))


def show_help(console: Console) -> None:
    """Show help information."""
    help_text = """
[bold cyan]lesionbench[/bold cyan] - Lesion segmentation evaluation and pipeline toolkit

[bold]Usage:[/bold]
    lesionbench <command> [arguments]

[bold]Commands:[/bold]
    [cyan]preprocess[/cyan] IN OUT          Resample to cubic spacing and z-score normalize
    [cyan]evaluate[/cyan] GT PRED --out D   Dice/NSD per case, policy summaries, subgroup reports
    [cyan]ensemble[/cyan] MODEL... --out D  Average probability maps and write argmax masks
    [cyan]schedule[/cyan]                   Sampling plans and learning-rate tables as CSV
    [cyan]folds[/cyan]                      Seeded k-fold split (nnU-Net splits layout)
    [cyan]help[/cyan]                       Show this help message
    [cyan]version[/cyan]                    Show version information

[bold]Examples:[/bold]
    # Preprocess images, then label masks
    lesionbench preprocess raw/images prep/images
    lesionbench preprocess raw/labels prep/labels --labels

    # Evaluate with demographic subgroups
    lesionbench evaluate prep/labels preds --out report --meta meta.csv --bins age=0,10,...,80

    # Ensemble two models, reporting what half precision would change
    lesionbench ensemble model_a model_b --out ens --mode half --compare-mode

    # Sampling probabilities and a warm-up schedule
    lesionbench schedule --sizes 20,80,180
    lesionbench schedule --warmup 50 --target 0.001 --epochs 1000

Run 'lesionbench <command> --help' for the options of a command.
Exit codes: 0 success, 1 usage error, 2 some inputs failed.
    """
    console.print(help_text)


# -- shared plumbing ---------------------------------------------------------


def _setup_logging(verbose: bool, quiet: bool) -> None:
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    package_logger = logging.getLogger("lesionbench")
    for handler in list(package_logger.handlers):
        if isinstance(handler, RichHandler):
            package_logger.removeHandler(handler)
    handler = RichHandler(console=Console(stderr=True), show_time=False, show_path=False)
    package_logger.addHandler(handler)
    package_logger.setLevel(level)


def _parser(command: str, description: str) -> _ArgumentParser:
    parser = _ArgumentParser(prog=f"lesionbench {command}", description=description)
    parser.add_argument("--config", type=Path, help="YAML settings file")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--verbose", action="store_true", help="debug logging")
    verbosity.add_argument("--quiet", action="store_true", help="warnings and errors only")
    return parser


def _add_jobs(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--jobs", type=int, help="worker processes (default: LESIONBENCH_JOBS or 1)"
    )


def _load_config(args: argparse.Namespace, overrides: dict[str, Any]) -> ToolkitConfig:
    """Defaults < environment < YAML < explicit flags."""
    config = ToolkitConfig.load(args.config)
    flags = {key: value for key, value in overrides.items() if value is not None}
    warnings = config.update_from_dict(flags)
    if warnings:
        raise UsageError("; ".join(warnings))
    return config


def _usage_failure(console: Console, error: Exception, hint: str | None = None) -> int:
    console.print(f"[red]Error: {error}[/red]")
    if hint:
        console.print(hint)
    return ExitCode.USAGE


def _run_tasks(worker: Callable[[Any], Any], tasks: list[Any], jobs: int) -> list[Any]:
    """Map ``worker`` over tasks, in a process pool when jobs > 1; order is preserved."""
    if jobs <= 1 or len(tasks) <= 1:
        return [worker(task) for task in tasks]
    with Pool(processes=min(jobs, len(tasks))) as pool:
        return pool.map(worker, tasks, chunksize=1)


def _finish(console: Console, failures: FailureLog, out_dir: Path) -> int:
    if failures.has_failures():
        failures.write_manifest(out_dir / FAILURE_MANIFEST)
        console.print(
            f"[yellow]{len(failures.records)} input(s) failed; "
            f"see {out_dir / FAILURE_MANIFEST}[/yellow]"
        )
    return failures.exit_code()


def _stems(paths: Iterable[Path]) -> dict[str, Path]:
    by_stem: dict[str, Path] = {}
    for path in paths:
        stem = case_stem(path)
        if stem in by_stem:
            raise UsageError(f"two files share case stem {stem!r}: {by_stem[stem].name}, {path.name}")
        by_stem[stem] = path
    return by_stem


def _read_record(path: Path) -> dict[str, Any]:
    if not path.is_file():
        return {}
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        logger.warning("ignoring unreadable %s: %s", path, e)
        return {}
    return data if isinstance(data, dict) else {}


# -- preprocess --------------------------------------------------------------


def _preprocess_one(task: tuple[Path, Path, float, str, bool]) -> FailureRecord | None:
    in_path, out_path, target_mm, mode, labels = task
    try:
        if labels:
            write_nifti(resample_isotropic(read_mask(in_path), target_mm, mode), out_path)
        else:
            write_nifti(preprocess_image(read_image(in_path), target_mm, mode), out_path)
    except Exception as e:
        return FailureRecord.from_error(in_path.name, e)
    return None


def run_preprocess(console: Console, args: list[str]) -> int:
    """Run preprocess command."""
    parser = _parser("preprocess", "Resample volumes to cubic spacing and z-score normalize.")
    parser.add_argument("in_dir", type=Path)
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("--target-mm", type=float, help="output spacing in mm (default 1.0)")
    parser.add_argument("--mode", choices=[m.value for m in Interpolation])
    parser.add_argument(
        "--labels", action="store_true", help="inputs are label masks: nearest, no z-score"
    )
    _add_jobs(parser)
    try:
        ns = parser.parse_args(args)
        _setup_logging(ns.verbose, ns.quiet)
        config = _load_config(
            ns, {"target_mm": ns.target_mm, "interpolation": ns.mode, "jobs": ns.jobs}
        )
        mode = config.interpolation
        if ns.labels:
            if ns.mode == Interpolation.TRILINEAR.value:
                raise UsageError("label masks must be resampled with --mode nearest")
            mode = Interpolation.NEAREST
        if not ns.in_dir.is_dir():
            raise UsageError(f"input directory not found: {ns.in_dir}")
        files = list_volumes(ns.in_dir)
        if not files:
            raise UsageError(f"no .nii or .nii.gz files in {ns.in_dir}")
    except (UsageError, ParameterError) as e:
        return _usage_failure(
            console, e, "Usage: lesionbench preprocess IN_DIR OUT_DIR [--target-mm MM] [--labels]"
        )

    ns.out_dir.mkdir(parents=True, exist_ok=True)
    tasks = [
        (path, ns.out_dir / path.name, config.target_mm, mode.value, ns.labels) for path in files
    ]
    monitor = PerformanceMonitor()
    failures = FailureLog("preprocess")
    with monitor.measure("preprocess"):
        outcomes = _run_tasks(_preprocess_one, tasks, config.jobs)
    for path, outcome in zip(files, outcomes):
        if outcome is None:
            logger.info("processed %s", case_stem(path))
        else:
            failures.add(outcome)

    done = sorted(p.name for p, o in zip(files, outcomes) if o is None)
    write_json(
        {
            "toolkit": "lesionbench",
            "version": __version__,
            "order": "resample" if ns.labels else PREPROCESSING_ORDER,
            "target_mm": config.target_mm,
            "interpolation": mode.value,
            "labels": ns.labels,
            "files": done,
        },
        ns.out_dir / PREPROCESS_RECORD,
    )
    logger.info(monitor.get_summary())
    console.print(f"Preprocessed {len(done)} of {len(files)} file(s) into {ns.out_dir}")
    return _finish(console, failures, ns.out_dir)


# -- evaluate ----------------------------------------------------------------


def _evaluate_one(task: tuple[str, Path, Path, float]) -> CaseResult | FailureRecord:
    case_id, gt_path, pred_path, tolerance_mm = task
    try:
        return evaluate_case(read_mask(gt_path), read_mask(pred_path), tolerance_mm, case_id)
    except Exception as e:
        return FailureRecord.from_error(case_id, e)


def _parse_bins(values: list[str] | None) -> dict[str, Any]:
    bins: dict[str, Any] = {}
    for value in values or []:
        axis, sep, edges = value.partition("=")
        axis = axis.strip().lower()
        if not sep or axis not in (SubgroupAxis.AGE.value, SubgroupAxis.TSI.value):
            raise UsageError(f"--bins expects age=EDGES or tsi=EDGES, got {value!r}")
        bins[f"{axis}_bins"] = list(parse_bin_edges(edges))
    return bins


def run_evaluate(console: Console, args: list[str]) -> int:
    """Run evaluate command."""
    parser = _parser("evaluate", "Score predictions against ground truth masks.")
    parser.add_argument("gt_dir", type=Path)
    parser.add_argument("pred_dir", type=Path)
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--meta", type=Path, help="demographic CSV for subgroup reports")
    parser.add_argument("--tolerance", type=float, help="NSD tolerance in mm (default 1.0)")
    parser.add_argument("--policy", choices=[p.value for p in AggregationPolicy])
    parser.add_argument("--bins", action="append", help="age=EDGES or tsi=EDGES (repeatable)")
    parser.add_argument(
        "--no-exclusion",
        action="store_true",
        help="keep empty/empty cases in subgroup reports (scored as 100)",
    )
    parser.add_argument(
        "--allow-partial", action="store_true", help="score matched cases despite unmatched stems"
    )
    _add_jobs(parser)
    try:
        ns = parser.parse_args(args)
        _setup_logging(ns.verbose, ns.quiet)
        overrides: dict[str, Any] = {
            "tolerance_mm": ns.tolerance,
            "policy": ns.policy,
            "jobs": ns.jobs,
            **_parse_bins(ns.bins),
        }
        config = _load_config(ns, overrides)
        for directory in (ns.gt_dir, ns.pred_dir):
            if not directory.is_dir():
                raise UsageError(f"directory not found: {directory}")
        gt_files = _stems(list_volumes(ns.gt_dir))
        pred_files = _stems(list_volumes(ns.pred_dir))
        metas = read_meta_table(ns.meta) if ns.meta is not None else None
    except (UsageError, ParameterError, MetadataError, OSError) as e:
        return _usage_failure(
            console, e, "Usage: lesionbench evaluate GT_DIR PRED_DIR --out OUT_DIR [--meta CSV]"
        )

    failures = FailureLog("evaluate")
    unmatched = sorted(set(gt_files) ^ set(pred_files))
    for stem in unmatched:
        side = "prediction" if stem in gt_files else "ground truth"
        failures.record(stem, FileNotFoundError(f"no {side} file for case {stem}"))
    if unmatched and not ns.allow_partial:
        console.print(f"[red]Unmatched case stems: {', '.join(unmatched)}[/red]")
        console.print("Re-run with --allow-partial to score the matched cases.")
        return _finish(console, failures, ns.out)

    matched = sorted(set(gt_files) & set(pred_files))
    if not matched:
        return _usage_failure(console, UsageError("no case stems match between GT and predictions"))

    monitor = PerformanceMonitor()
    tasks = [(c, gt_files[c], pred_files[c], config.tolerance_mm) for c in matched]
    with monitor.measure("evaluate cases"):
        outcomes = _run_tasks(_evaluate_one, tasks, config.jobs)
    results: list[CaseResult] = []
    for outcome in outcomes:
        if isinstance(outcome, FailureRecord):
            failures.add(outcome)
        else:
            results.append(outcome)
            logger.info("processed %s", outcome.case_id)
    results.sort(key=lambda r: r.case_id)
    if not results:
        console.print("[red]No case could be evaluated[/red]")
        return _finish(console, failures, ns.out)

    ns.out.mkdir(parents=True, exist_ok=True)
    with monitor.measure("reports"):
        try:
            _write_reports(console, ns, config, results, metas)
        except LesionBenchError as e:
            return _usage_failure(console, e)
    logger.info(monitor.get_summary())
    return _finish(console, failures, ns.out)


def _write_reports(
    console: Console,
    ns: argparse.Namespace,
    config: ToolkitConfig,
    results: list[CaseResult],
    metas: list[CaseMeta] | None,
) -> None:
    write_case_results(results, ns.out / "cases.csv")

    summaries = {policy.value: aggregate(results, policy) for policy in AggregationPolicy}
    ensemble_record = _read_record(ns.pred_dir / ENSEMBLE_RECORD)
    preprocess_record = _read_record(ns.gt_dir / PREPROCESS_RECORD) or _read_record(
        ns.pred_dir / PREPROCESS_RECORD
    )

    by_sex = None
    displayed = {name: [row] for name, row in summaries.items()}
    if metas is not None:
        by_sex = {
            policy.value: sex_breakdown_rows(results, metas, policy) for policy in AggregationPolicy
        }
        displayed = dict(by_sex)
        exclusion = not ns.no_exclusion
        specs = [
            SubgroupSpec(SubgroupAxis.SEX, exclusion=exclusion),
            SubgroupSpec(SubgroupAxis.AGE, config.age_bins, exclusion),
            SubgroupSpec(SubgroupAxis.TSI, config.tsi_bins, exclusion),
        ]
        for spec in specs:
            rows = subgroup_report(results, metas, spec)
            axis = spec.axis.value
            write_subgroup_csv(rows, ns.out / f"subgroups_{axis}.csv")
            write_subgroup_svg(rows, axis, ns.out / f"subgroups_{axis}.svg")

    payload = summary_payload(
        version=__version__,
        tolerance_mm=config.tolerance_mm,
        policy=config.policy.value,
        summaries=summaries,
        n_cases=len(results),
        precision=ensemble_record.get("mode"),
        preprocessing_order=preprocess_record.get("order"),
        by_sex=by_sex,
    )
    write_json(payload, ns.out / "summary.json")
    show_summaries(displayed, console)


# -- ensemble ----------------------------------------------------------------


def _ensemble_one(
    task: tuple[str, list[Path], list[float], str, bool, int, Path],
) -> tuple[str, dict[str, Any] | None] | FailureRecord:
    case_id, paths, tolerances, mode_name, compare, cap, out_dir = task
    mode = PrecisionMode.parse(mode_name)
    try:
        stacks = [read_probability_stack(p, tol) for p, tol in zip(paths, tolerances)]
        mean = ensemble_probs(stacks, mode)
        labels = argmax_labels(mean)
        name = paths[0].name
        write_probability_stack(mean, out_dir / "probs" / name)
        write_nifti(labels, out_dir / "masks" / name)
        report = None
        if compare:
            reference = argmax_labels(ensemble_probs(stacks, PrecisionMode.DOUBLE))
            report = compare_labelings(labels, reference, cap, case_id).to_dict()
    except Exception as e:
        return FailureRecord.from_error(case_id, e)
    return case_id, report


def _sum_tolerance(model_dir: Path) -> float:
    """Class-sum tolerance for a model directory, looser for half-precision ensembles."""
    value = _read_record(model_dir / ENSEMBLE_RECORD).get("sum_tolerance")
    if isinstance(value, int | float) and not isinstance(value, bool) and 0 < value < 1:
        return float(value)
    return PROBABILITY_SUM_TOLERANCE


def run_ensemble(console: Console, args: list[str]) -> int:
    """Run ensemble command."""
    parser = _parser("ensemble", "Average per-model probability maps and take the argmax.")
    parser.add_argument("model_dirs", type=Path, nargs="+")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--mode", choices=[m.value for m in PrecisionMode])
    parser.add_argument(
        "--compare-mode",
        action="store_true",
        help="report voxels whose label differs from double-precision ensembling",
    )
    parser.add_argument("--cap", type=int, help="voxels listed per case in the comparison")
    _add_jobs(parser)
    try:
        ns = parser.parse_args(args)
        _setup_logging(ns.verbose, ns.quiet)
        config = _load_config(
            ns, {"precision": ns.mode, "jobs": ns.jobs, "disagreement_cap": ns.cap}
        )
        models: list[dict[str, Path]] = []
        for directory in ns.model_dirs:
            if not directory.is_dir():
                raise UsageError(f"model directory not found: {directory}")
            models.append(_stems(list_volumes(directory)))
        if not any(models):
            raise UsageError("model directories contain no probability files")
    except (UsageError, ParameterError) as e:
        return _usage_failure(
            console, e, "Usage: lesionbench ensemble MODEL_DIR... --out OUT_DIR [--mode MODE]"
        )

    mode = config.precision
    if mode is PrecisionMode.HALF:
        logger.warning(HALF_PRECISION_WARNING)

    failures = FailureLog("ensemble")
    all_cases = sorted(set().union(*models))
    cases = [c for c in all_cases if all(c in m for m in models)]
    for case_id in all_cases:
        if case_id not in cases:
            missing = [str(d) for d, m in zip(ns.model_dirs, models) if case_id not in m]
            failures.record(case_id, FileNotFoundError(f"missing in {', '.join(missing)}"))

    tolerances = [_sum_tolerance(directory) for directory in ns.model_dirs]
    tasks = [
        (
            c,
            [m[c] for m in models],
            tolerances,
            mode.value,
            ns.compare_mode,
            config.disagreement_cap,
            ns.out,
        )
        for c in cases
    ]
    monitor = PerformanceMonitor()
    with monitor.measure("ensemble"):
        outcomes = _run_tasks(_ensemble_one, tasks, config.jobs)

    done: list[str] = []
    reports: dict[str, Any] = {}
    for outcome in outcomes:
        if isinstance(outcome, FailureRecord):
            failures.add(outcome)
            continue
        case_id, report = outcome
        done.append(case_id)
        if report is not None:
            reports[case_id] = report
        logger.info("processed %s", case_id)

    ns.out.mkdir(parents=True, exist_ok=True)
    record = {
        "toolkit": "lesionbench",
        "version": __version__,
        "mode": mode.value,
        "sum_tolerance": mode.sum_tolerance,
        "models": [str(d) for d in ns.model_dirs],
        "cases": done,
    }
    write_json(record, ns.out / "masks" / ENSEMBLE_RECORD)
    if done:
        write_json(record, ns.out / "probs" / ENSEMBLE_RECORD)
    if ns.compare_mode:
        total = sum(r["count"] for r in reports.values())
        write_json(
            {"mode": mode.value, "reference": PrecisionMode.DOUBLE.value, "total": total, "cases": reports},
            ns.out / "disagreement.json",
        )
        console.print(
            f"{mode.value} vs double: {total} differing voxel(s) across {len(reports)} case(s)"
        )
    logger.info(monitor.get_summary())
    console.print(f"Ensembled {len(done)} case(s) from {len(models)} model(s) into {ns.out}")
    return _finish(console, failures, ns.out)


# -- schedule ----------------------------------------------------------------


def _csv_text(header: list[str], rows: Iterable[Iterable[Any]]) -> str:
    frame = pd.DataFrame([list(row) for row in rows], columns=header)
    return frame.to_csv(index=False, lineterminator="\n")


def _emit(console: Console, text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        write_text_atomic(out, text)
        console.print(f"Wrote {out}")


def _parse_sizes(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"--sizes expects comma-separated integers, got {text!r}") from None


def run_schedule(console: Console, args: list[str]) -> int:
    """Run schedule command."""
    parser = _parser("schedule", "Emit dataset sampling plans or learning-rate tables as CSV.")
    sizes = parser.add_mutually_exclusive_group()
    sizes.add_argument("--sizes", help="comma-separated image counts, e.g. 20,80,180")
    sizes.add_argument("--sizes-csv", type=Path, help="CSV with columns dataset,count")
    sizes.add_argument("--pretraining", action="store_true", help="the pretraining collection")
    parser.add_argument("--draws", type=int, default=0, help="seeded draws to tally per dataset")
    parser.add_argument("--seed", type=int)
    lr = parser.add_mutually_exclusive_group()
    lr.add_argument("--poly", action="store_true", help="poly schedule")
    lr.add_argument("--warmup", type=int, metavar="W", help="linear warm-up over W epochs, then poly")
    lr.add_argument("--preset", choices=list(FINETUNE_PRESETS))
    parser.add_argument("--lr0", type=float, help="initial learning rate (poly)")
    parser.add_argument("--target", type=float, help="warm-up target learning rate")
    parser.add_argument("--epochs", type=int, default=DEFAULT_FINETUNE_EPOCHS)
    parser.add_argument("--exponent", type=float)
    parser.add_argument("--out", type=Path, help="CSV file (default: standard output)")
    try:
        ns = parser.parse_args(args)
        _setup_logging(ns.verbose, ns.quiet)
        config = _load_config(ns, {"seed": ns.seed, "poly_exponent": ns.exponent})
        wants_plan = bool(ns.sizes or ns.sizes_csv or ns.pretraining)
        wants_lr = bool(ns.poly or ns.warmup is not None or ns.preset)
        if wants_plan == wants_lr:
            raise UsageError("choose either a sampling plan (--sizes/--sizes-csv/--pretraining) "
                             "or a learning-rate schedule (--poly/--warmup/--preset)")
        if wants_plan:
            text = _plan_csv(console, ns, config)
        else:
            text = _lr_csv(console, ns, config)
    except (UsageError, ParameterError, MetadataError, OSError) as e:
        return _usage_failure(console, e, "Run 'lesionbench schedule --help' for options.")

    _emit(console, text, ns.out)
    return ExitCode.SUCCESS


def _plan_csv(console: Console, ns: argparse.Namespace, config: ToolkitConfig) -> str:
    if ns.pretraining:
        plan = pretraining_plan()
    elif ns.sizes_csv is not None:
        ids, counts = read_dataset_sizes(ns.sizes_csv)
        plan = sampling_weights(counts, ids)
    else:
        plan = sampling_weights(_parse_sizes(ns.sizes))
    if ns.out is not None:
        show_sampling_plan(plan, console)

    header = ["dataset", "count", "probability"]
    rows: list[list[Any]] = [list(row) for row in plan.as_rows()]
    if ns.draws:
        drawn = sample_sequence(plan, config.seed, ns.draws)
        tallies = Counter(drawn)
        header.append("drawn")
        for row in rows:
            row.append(tallies.get(row[0], 0))
    return _csv_text(header, rows)


def _lr_csv(console: Console, ns: argparse.Namespace, config: ToolkitConfig) -> str:
    if ns.preset:
        schedule = finetune_schedule(ns.preset, ns.epochs)
    elif ns.warmup is not None:
        target = ns.target if ns.target is not None else ns.lr0 if ns.lr0 is not None else 0.01
        schedule = LrSchedule.warmup_then_poly(target, ns.warmup, ns.epochs, config.poly_exponent)
    else:
        lr0 = ns.lr0 if ns.lr0 is not None else ns.target if ns.target is not None else 0.01
        schedule = LrSchedule.poly(lr0, ns.epochs, config.poly_exponent)

    rates = lr_table(schedule)
    metadata = {**schedule.metadata(), "training": dict(TRAINING_METADATA)}
    if ns.out is not None:
        show_schedule(schedule, rates, console)
        write_json(metadata, ns.out.with_suffix(".json"))
    else:
        logger.info("schedule metadata: %s", json.dumps(metadata))
    return _csv_text(["epoch", "lr"], enumerate(rates))


# -- folds -------------------------------------------------------------------


def run_folds(console: Console, args: list[str]) -> int:
    """Run folds command."""
    parser = _parser("folds", "Seeded k-fold split of case ids.")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--ids", type=Path, help="text file with one case id per line")
    source.add_argument("--dir", type=Path, help="directory of NIfTI cases (ids are file stems)")
    parser.add_argument("--k", type=int, default=5)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--out", type=Path, help="splits JSON (default: standard output)")
    try:
        ns = parser.parse_args(args)
        _setup_logging(ns.verbose, ns.quiet)
        config = _load_config(ns, {"seed": ns.seed})
        if ns.ids is not None:
            lines = ns.ids.read_text(encoding="utf-8").splitlines()
            case_ids = [line.strip() for line in lines if line.strip()]
        else:
            if not ns.dir.is_dir():
                raise UsageError(f"directory not found: {ns.dir}")
            case_ids = sorted(_stems(list_volumes(ns.dir)))
        folds = make_folds(case_ids, ns.k, config.seed)
    except (UsageError, ParameterError, OSError) as e:
        return _usage_failure(console, e, "Usage: lesionbench folds (--ids FILE | --dir DIR) [--k 5]")

    text = json.dumps(folds_to_splits(folds), indent=2) + "\n"
    _emit(console, text, ns.out)
    if ns.out is not None:
        sizes = ", ".join(str(len(f)) for f in folds)
        console.print(f"{len(case_ids)} cases in {ns.k} folds (sizes {sizes}), seed {config.seed}")
    return ExitCode.SUCCESS


__all__ = [
    "main",
    "run_ensemble",
    "run_evaluate",
    "run_folds",
    "run_preprocess",
    "run_schedule",
    "show_help",
]
