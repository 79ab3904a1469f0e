"""
lesionbench - Evaluation and pipeline toolkit for volumetric lesion segmentation.

Reads NIfTI volumes, resamples and normalizes them, scores predictions with
Dice and Normalized Surface Dice, ensembles probability maps and emits
the sampling, learning-rate and fold schedules of a training run.
"""

__version__ = "0.1.0"

from lesionbench.core import CaseMeta, Geometry, LabelMask, ProbabilityStack, Sex, VoxelGrid  # noqa: E402
from lesionbench.ensemble import (  # noqa: E402
    PrecisionMode,
    argmax_labels,
    compare_labelings,
    ensemble_probs,
)
from lesionbench.evaluation import (  # noqa: E402
    AggregationPolicy,
    CaseResult,
    SubgroupAxis,
    SubgroupSpec,
    aggregate,
    evaluate_case,
    fold_average,
    join_metadata,
    subgroup_report,
)
from lesionbench.metrics import MetricValue, dice, edt, extract_surface, nsd  # noqa: E402
from lesionbench.preprocess import (  # noqa: E402
    Interpolation,
    preprocess_image,
    resample_isotropic,
    zscore_normalize,
)
from lesionbench.schedules import (  # noqa: E402
    LrSchedule,
    lr_at,
    make_folds,
    sample_sequence,
    sampling_weights,
)
from lesionbench.volume_io import (  # noqa: E402
    read_image,
    read_mask,
    read_nifti,
    read_probability_stack,
    write_nifti,
    write_probability_stack,
)

__all__ = [
    "Geometry",
    "VoxelGrid",
    "LabelMask",
    "ProbabilityStack",
    "Sex",
    "CaseMeta",
    "read_nifti",
    "read_image",
    "read_mask",
    "read_probability_stack",
    "write_nifti",
    "write_probability_stack",
    "Interpolation",
    "resample_isotropic",
    "zscore_normalize",
    "preprocess_image",
    "MetricValue",
    "dice",
    "nsd",
    "edt",
    "extract_surface",
    "AggregationPolicy",
    "CaseResult",
    "SubgroupAxis",
    "SubgroupSpec",
    "evaluate_case",
    "aggregate",
    "fold_average",
    "join_metadata",
    "subgroup_report",
    "PrecisionMode",
    "ensemble_probs",
    "argmax_labels",
    "compare_labelings",
    "LrSchedule",
    "lr_at",
    "sampling_weights",
    "sample_sequence",
    "make_folds",
]
