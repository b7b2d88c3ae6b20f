"""Loading user-supplied segmentation models from plain Python files.

A model lives in an ordinary ``.py`` file that exposes a factory (the
entry point, ``build_model`` by default).  The factory takes keyword
configuration and returns the model itself: a callable

    model(image, rng) -> probs

where ``image`` is a 2D float array, ``rng`` is a ``numpy.random.Generator``,
and ``probs`` is a ``(num_classes, height, width)`` array of per-class
probabilities summing to one per pixel.  Deterministic models simply ignore
the rng; stochastic ones (dropout kept active at inference) must draw all
their randomness from it so runs are reproducible.

Dropout rate and placement are model concerns: whatever the factory accepts
is passed through unchanged via ``ModelHandle.config``.
"""

from __future__ import annotations

import importlib.util
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

Model = Callable[[np.ndarray, np.random.Generator], np.ndarray]


class ModelError(ValueError):
    """Model file missing, entry point absent, or output malformed."""


@dataclass(frozen=True)
class ModelHandle:
    """Where a model comes from and what it can do.

    ``supports_dropout`` declares that the model keeps its dropout layers
    stochastic at inference time; test-time dropout refuses to run without
    it rather than silently averaging identical samples.
    """

    path: Path
    entry: str = "build_model"
    config: dict = field(default_factory=dict)
    supports_dropout: bool = False

    def __post_init__(self):
        object.__setattr__(self, "path", Path(self.path))

    @property
    def spec(self) -> str:
        # stable id recorded in ensemble metadata
        return f"{self.path.name}:{self.entry}"

    def load(self) -> Model:
        return load_model(self)


def load_model(handle: ModelHandle) -> Model:
    """Import the model file and call its entry point with the config."""
    path = handle.path
    if not path.is_file():
        raise ModelError(f"model file not found: {path}")
    spec = importlib.util.spec_from_file_location(f"_adapter_model_{path.stem}", path)
    if spec is None or spec.loader is None:
        raise ModelError(f"cannot import model file: {path}")
    module = importlib.util.module_from_spec(spec)
    sys.modules[spec.name] = module
    spec.loader.exec_module(module)
    factory = getattr(module, handle.entry, None)
    if factory is None:
        raise ModelError(f"model file {path} has no entry point {handle.entry!r}")
    model = factory(**handle.config)
    if not callable(model):
        raise ModelError(f"entry point {handle.entry!r} did not return a callable")
    return model
