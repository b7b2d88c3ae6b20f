"""Sampling runners: repeated model inference serialized as core sample stacks.

The adapter never computes metrics and never owns geometry.  Test-time
augmentation writes the raw, still-transformed predictions plus a
transforms sidecar; inversion back onto the original grid goes through the
core's align_tta_samples so both components share one implementation.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from raterlens import (
    InvariantError,
    ProbMap,
    SampleStack,
    ScalarMap,
    align_tta_samples,
    apply_transform,
    read_array,
    sample_transforms,
    transforms_from_json,
    transforms_to_json,
    write_array,
)

from .models import ModelError, ModelHandle

DEFAULT_SAMPLES = 10


def _sample_rng(seed: int, index: int) -> np.random.Generator:
    # one independent stream per sample: extending n never reruns earlier draws
    return np.random.default_rng([seed, index])


def _as_prob_map(raw, context: str) -> ProbMap:
    arr = np.asarray(raw)
    if arr.ndim != 3:
        raise ModelError(f"{context}: expected (classes, height, width), got shape {arr.shape}")
    try:
        return ProbMap(arr.astype(np.float32))
    except InvariantError as exc:
        raise ModelError(f"{context}: non-simplex output rejected: {exc}") from exc


def transforms_sidecar_path(stack_path: Path | str) -> Path:
    stack_path = Path(stack_path)
    return stack_path.with_name(stack_path.stem + ".transforms.json")


def models_sidecar_path(stack_path: Path | str) -> Path:
    stack_path = Path(stack_path)
    return stack_path.with_name(stack_path.stem + ".models.json")


def run_ttd(
    handle: ModelHandle,
    image: np.ndarray,
    out_path: Path | str,
    n: int = DEFAULT_SAMPLES,
    seed: int = 0,
) -> Path:
    """n stochastic forward passes with dropout active, written as one stack."""
    if n < 1:
        raise ModelError("need at least one sample")
    if not handle.supports_dropout:
        raise ModelError(
            f"model {handle.spec} does not support dropout; "
            "test-time dropout needs stochastic inference"
        )
    model = handle.load()
    image = np.asarray(image, dtype=np.float32)
    samples = []
    for k in range(n):
        p = _as_prob_map(model(image, _sample_rng(seed, k)), f"sample {k}")
        samples.append(p.probs)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_array(SampleStack(np.stack(samples)), out_path)
    return out_path


def run_tta(
    handle: ModelHandle,
    image: np.ndarray,
    transforms_path: Path | str,
    out_path: Path | str,
    seed: int,
) -> Path:
    """Inference on augmented copies of the image.

    Predictions are written raw, on the transformed grids, together with a
    ``<stem>.transforms.json`` sidecar; align the stack through the core
    before aggregating.  The per-transform noise seeds fingerprint the
    master seed that generated the transforms file, so a wrong ``seed``
    argument is caught here instead of producing silently misaligned
    samples downstream.
    """
    transforms = transforms_from_json(transforms_path)
    expected = sample_transforms(len(transforms), seed=seed)
    if [t.seed for t in transforms] != [t.seed for t in expected]:
        raise ModelError(
            f"transforms file {transforms_path} was not generated with seed {seed}"
        )
    model = handle.load()
    image = ScalarMap(np.asarray(image, dtype=np.float32))
    samples = []
    for k, t in enumerate(transforms):
        warped = apply_transform(image, t)
        p = _as_prob_map(model(warped.values, _sample_rng(seed, k)), f"sample {k}")
        samples.append(p.probs)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_array(SampleStack(np.stack(samples)), out_path)
    transforms_to_json(transforms, transforms_sidecar_path(out_path))
    return out_path


def align_stack(
    raw_path: Path | str, out_path: Path | str, transforms_path: Path | str | None = None
) -> Path:
    """Invert a raw TTA stack onto the original grid via the core.

    Pure plumbing: load, hand each sample to the core's alignment, write.
    ``transforms_path`` defaults to the sidecar run_tta left next to the
    raw stack.
    """
    raw_path = Path(raw_path)
    if transforms_path is None:
        transforms_path = transforms_sidecar_path(raw_path)
    stack = read_array(raw_path, "stack")
    transforms = transforms_from_json(transforms_path)
    aligned = align_tta_samples([ProbMap(s) for s in stack.samples], transforms)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_array(aligned, out_path)
    return out_path


def run_ensemble(
    handles: list[ModelHandle],
    image: np.ndarray,
    out_path: Path | str,
    seed: int = 0,
) -> Path:
    """One sample per model, in the given model order.

    The order is recorded in a ``<stem>.models.json`` sidecar so downstream
    consumers can attribute samples to members.
    """
    if not handles:
        raise ModelError("need at least one model")
    image = np.asarray(image, dtype=np.float32)
    samples = []
    shape = None
    for k, handle in enumerate(handles):
        model = handle.load()
        p = _as_prob_map(model(image, _sample_rng(seed, k)), f"model {k} ({handle.spec})")
        if shape is None:
            shape = p.probs.shape
        elif p.probs.shape != shape:
            raise ModelError(
                f"inter-model shape disagreement: model {k} ({handle.spec}) "
                f"produced {p.probs.shape}, expected {shape}"
            )
        samples.append(p.probs)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_array(SampleStack(np.stack(samples)), out_path)
    doc = {"order": [h.spec for h in handles]}
    models_sidecar_path(out_path).write_text(
        json.dumps(doc, indent=2) + "\n", encoding="utf-8"
    )
    return out_path
