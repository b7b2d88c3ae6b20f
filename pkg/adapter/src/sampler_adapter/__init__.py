"""Bridges trained segmentation models to the raterlens analysis core.

Runs test-time dropout, test-time augmentation (replaying the core's
serialized transforms), and deep-ensemble inference on user-supplied
models, and converts external per-rater mask datasets, writing everything
in the core's file formats.  The adapter samples and serializes; all
metrics and all geometry live in the core.
"""

from .dataset import DatasetError, convert_dataset
from .models import Model, ModelError, ModelHandle, load_model
from .runners import (
    DEFAULT_SAMPLES,
    align_stack,
    models_sidecar_path,
    run_ensemble,
    run_ttd,
    run_tta,
    transforms_sidecar_path,
)

__version__ = "0.1.0"

__all__ = [
    "Model",
    "ModelError",
    "ModelHandle",
    "load_model",
    "DEFAULT_SAMPLES",
    "run_ttd",
    "run_tta",
    "run_ensemble",
    "align_stack",
    "transforms_sidecar_path",
    "models_sidecar_path",
    "DatasetError",
    "convert_dataset",
]
