"""Losses, pseudo-weak sampling, and the two-stage training pipeline."""

from .config import ConfigError, RunConfig, load_run_config, parse_kv_file, run_config_from_dict
from .losses import (
    EmptyBatch,
    LossBundle,
    detection_loss,
    dice_loss,
    mean_of,
    opm_pairwise_loss,
    recognition_loss,
    smooth_l1_loss,
    total_loss,
    weak_recognition_loss,
)
from .pipeline import (
    FullSample,
    MissingCheckpoint,
    WeakSample,
    full_batch_terms,
    load_full_samples,
    load_weak_samples,
    opm_heldout_loss,
    prepare_full_sample,
    pseudo_weak_distances,
    train_stage_full,
    train_stage_one,
    train_stage_two,
    weak_image_loss,
)
from .pseudo import NoRegions, PseudoWeakSample, make_pseudo_weak_sample
from . import targets

__all__ = [
    "ConfigError",
    "RunConfig",
    "load_run_config",
    "parse_kv_file",
    "run_config_from_dict",
    "EmptyBatch",
    "LossBundle",
    "detection_loss",
    "dice_loss",
    "mean_of",
    "opm_pairwise_loss",
    "recognition_loss",
    "smooth_l1_loss",
    "total_loss",
    "weak_recognition_loss",
    "FullSample",
    "WeakSample",
    "MissingCheckpoint",
    "full_batch_terms",
    "load_full_samples",
    "load_weak_samples",
    "opm_heldout_loss",
    "prepare_full_sample",
    "pseudo_weak_distances",
    "train_stage_full",
    "train_stage_one",
    "train_stage_two",
    "weak_image_loss",
    "NoRegions",
    "PseudoWeakSample",
    "make_pseudo_weak_sample",
    "targets",
]
