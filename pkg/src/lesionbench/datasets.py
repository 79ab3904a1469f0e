"""Pretraining dataset collection and fine-tuning schedule presets."""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Any

from lesionbench.errors import ParameterError
from lesionbench.schedules import LrSchedule, SamplingPlan, sampling_weights

DEFAULT_FINETUNE_EPOCHS = 1000
WARMUP_EPOCHS = 50


@dataclass(frozen=True)
class PretrainingDataset:
    name: str
    images: int
    modality: str
    target: str


PRETRAINING_DATASETS: tuple[PretrainingDataset, ...] = (
    PretrainingDataset("Decathlon Task 2", 20, "MRI", "Heart"),
    PretrainingDataset("Decathlon Task 3", 131, "CT", "Liver, L. Tumor"),
    PretrainingDataset("Decathlon Task 4", 208, "MRI", "Hippocampus"),
    PretrainingDataset("Decathlon Task 5", 32, "MRI", "Prostate"),
    PretrainingDataset("Decathlon Task 6", 63, "CT", "Lung Lesion"),
    PretrainingDataset("Decathlon Task 7", 281, "CT", "Pancreas, P. Tumor"),
    PretrainingDataset("Decathlon Task 8", 303, "CT", "Hepatic Vessel, H. Tumor"),
    PretrainingDataset("Decathlon Task 9", 41, "CT", "Spleen"),
    PretrainingDataset("Decathlon Task 10", 126, "CT", "Colon Tumor"),
    PretrainingDataset("ISLES2015", 28, "MRI", "Stroke Lesion"),
    PretrainingDataset("BTCV", 30, "CT", "13 abdominal organs"),
    PretrainingDataset("LIDC", 1010, "CT", "Lung lesion"),
    PretrainingDataset("Promise12", 50, "MRI", "Prostate"),
    PretrainingDataset("ACDC", 200, "MRI", "RV cavity, myocardium, LV cavity"),
    PretrainingDataset("ISBILesion2015", 42, "MRI", "MS Lesion"),
    PretrainingDataset("CHAOS", 60, "MRI", "Liver, Kidney (L&R), Spleen"),
    PretrainingDataset("BTCV 2", 63, "CT", "9 abdominal organs"),
    PretrainingDataset("StructSeg Task1", 50, "CT", "22 OAR Head & neck"),
    PretrainingDataset("StructSeg Task2", 50, "CT", "Nasopharynx cancer"),
    PretrainingDataset("StructSeg Task3", 50, "CT", "6 OAR Lung"),
    PretrainingDataset("StructSeg Task4", 50, "CT", "Lung Cancer"),
    PretrainingDataset("SegTHOR", 40, "CT", "heart, aorta, trachea, esophagus"),
    PretrainingDataset("NIH-Pan", 82, "CT", "Pancreas"),
    PretrainingDataset("VerSe2020", 113, "CT", "28 Vertebrae"),
    PretrainingDataset("M&Ms", 300, "MRI", "l. ventricle, r. ventricle, l. ventri. myocardium"),
    PretrainingDataset("ProstateX", 140, "MRI", "Prostate lesion"),
    PretrainingDataset("RibSeg", 370, "CT", "Ribs"),
    PretrainingDataset("MSLesion", 48, "MRI", "MS Lesion"),
    PretrainingDataset("BrainMetShare", 84, "MRI", "Brain Metastases"),
    PretrainingDataset("CrossModa22", 168, "MRI", "vestibular schwannoma, cochlea"),
    PretrainingDataset("Atlas22", 524, "MRI", "stroke lesion"),
    PretrainingDataset("KiTs23", 489, "CT", "Kidneys, k. Tumors, Cysts"),
    PretrainingDataset("AutoPet2", 1014, "PET,CT", "Lesions"),
    PretrainingDataset("AMOS", 360, "CT,MRI", "15 abdominal organs"),
    PretrainingDataset("BraTs23", 1251, "MRI", "Glioblastoma"),
    PretrainingDataset("AbdomenAtlas1.0", 5195, "CT", "8 abdominal organs"),
    PretrainingDataset("TotalSegmentatorV2", 1180, "CT", "117 classes of whole body"),
    PretrainingDataset("Hecktor2022", 524, "PET,CT", "nodal Gross Tumor Volumes (Head&Neck)"),
    PretrainingDataset("FLARE", 50, "CT", "13 abdominal organs"),
    PretrainingDataset("SegRap", 120, "CT", "45 OARs (Head&Neck)"),
    PretrainingDataset("SegA", 56, "CT", "Aorta"),
    PretrainingDataset("WORD", 120, "CT", "16 abdominal organs"),
    PretrainingDataset("AbdomenCT1K", 996, "CT", "Liver, Kidney, Spleen, pancreas"),
    PretrainingDataset("DAP-ATLAS", 533, "CT", "142 classes of whole body"),
    PretrainingDataset("CTORG", 140, "CT", "lung, brain, bones, liver, kidneys and bladder"),
    PretrainingDataset("HanSeg", 42, "CT", "OAR (Head&Neck)"),
    PretrainingDataset("TopCow", 200, "CT,MRI", "vessel components of CoW"),
)

# Recorded alongside schedules; no training happens in this package
TRAINING_METADATA: MappingProxyType[str, Any] = MappingProxyType(
    {
        "patch_size": (192, 192, 192),
        "batch_size": 24,
        "pretraining_epochs": 4000,
        "finetune_epochs": DEFAULT_FINETUNE_EPOCHS,
        "spacing_mm": 1.0,
        "normalization": "zscore",
    }
)


def pretraining_plan() -> SamplingPlan:
    """Sampling plan over the pretraining collection."""
    return sampling_weights(
        [d.images for d in PRETRAINING_DATASETS],
        dataset_ids=[d.name for d in PRETRAINING_DATASETS],
    )


def _default(total_epochs: int) -> LrSchedule:
    return LrSchedule.poly(0.01, total_epochs)


def _low_lr(total_epochs: int) -> LrSchedule:
    return LrSchedule.poly(0.001, total_epochs)


def _warmup_high(total_epochs: int) -> LrSchedule:
    return LrSchedule.warmup_then_poly(0.01, WARMUP_EPOCHS, total_epochs)


def _warmup_low(total_epochs: int) -> LrSchedule:
    return LrSchedule.warmup_then_poly(0.001, WARMUP_EPOCHS, total_epochs)


FINETUNE_PRESETS = MappingProxyType(
    {
        "default": _default,
        "lr0.001": _low_lr,
        "warmup_lr0.01": _warmup_high,
        "warmup_lr0.001": _warmup_low,
    }
)


def finetune_schedule(name: str, total_epochs: int = DEFAULT_FINETUNE_EPOCHS) -> LrSchedule:
    """
    Build a named fine-tuning schedule.

    Raises:
        ParameterError: If the preset name is unknown
    """
    try:
        factory = FINETUNE_PRESETS[name]
    except KeyError:
        choices = ", ".join(FINETUNE_PRESETS)
        raise ParameterError(f"unknown preset {name!r} (choose from {choices})") from None
    return factory(total_epochs)
