"""Typed 2D array containers and their file formats.

All analysis in this package runs on four kinds of single-slice arrays:

* ``LabelMap``    -- per-pixel integer class assignments, shape (H, W), uint8
* ``ProbMap``     -- per-pixel class-probability simplex, shape (C, H, W), float32
* ``SampleStack`` -- N Monte-Carlo probability maps plus per-sample validity
                     masks, shape (N, C, H, W) / (N, H, W)
* ``ScalarMap``   -- nonnegative per-pixel scalar field, shape (H, W), float32

Every container validates its invariants at construction and is immutable
afterwards (the backing numpy buffers are write-protected), so instances can
be shared freely across threads.

On disk each container is a single NPY version-1.0 file (little-endian,
row-major; ``|u1`` for labels and validity masks, ``<f4`` for probabilities
and scalars).  A stack whose validity mask is not all-true gets a sibling
file named ``<stem>.valid.npy``.  ``write_array`` followed by ``read_array``
is bit-exact for every container produced by these constructors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import numpy.lib.format as npy_format

__all__ = [
    "InvariantError",
    "LabelMap",
    "ProbMap",
    "SampleStack",
    "ScalarMap",
    "one_hot",
    "argmax_labels",
    "read_array",
    "write_array",
    "peek_header",
    "valid_mask_path",
]

# Per-pixel probability sums may deviate from 1 by at most this much before
# the map is rejected outright.
SIMPLEX_TOLERANCE = 1e-5

# Sums closer to 1 than this are accepted verbatim (renormalizing would only
# churn low-order bits and break bit-exact round trips).
_RENORM_THRESHOLD = 1e-6

# Slack for float32 rounding on individual probabilities and scalars.
_VALUE_SLACK = 1e-6


class InvariantError(ValueError):
    """A container invariant was violated (bad values, shapes, or dtypes)."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


def _first_bad_pixel(bad: np.ndarray) -> tuple[int, ...]:
    """Coordinates of the first True entry of a boolean array."""
    idx = np.argwhere(bad)
    return tuple(int(v) for v in idx[0])


@dataclass(eq=False)
class LabelMap:
    """Per-pixel class indices from one rater or one fusion result."""

    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2 or labels.shape[0] < 1 or labels.shape[1] < 1:
            raise InvariantError(f"label grid must be 2D and nonempty, got shape {labels.shape}")
        if self.num_classes < 2:
            raise InvariantError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.num_classes > 256:
            raise InvariantError("uint8 labels support at most 256 classes")
        if labels.dtype != np.uint8:
            if not np.issubdtype(labels.dtype, np.integer):
                raise InvariantError(f"labels must be integer, got dtype {labels.dtype}")
            if labels.min() < 0 or labels.max() > 255:
                raise InvariantError("labels out of uint8 range")
            labels = labels.astype(np.uint8)
        else:
            labels = labels.copy()
        if labels.max(initial=0) >= self.num_classes:
            y, x = _first_bad_pixel(labels >= self.num_classes)
            raise InvariantError(
                f"label {int(labels[y, x])} >= num_classes {self.num_classes} at ({y},{x})"
            )
        self.labels = _freeze(labels)

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape


@dataclass(eq=False)
class ProbMap:
    """Per-pixel class-probability simplex, channel-first (C, H, W).

    Pixels whose probabilities sum to within ``SIMPLEX_TOLERANCE`` of 1 are
    accepted; of those, pixels further than 1e-6 from 1 are renormalized.
    Anything else is rejected with the offending pixel coordinate.
    """

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs)
        if probs.ndim != 3:
            raise InvariantError(f"probability grid must be (C, H, W), got shape {probs.shape}")
        c, h, w = probs.shape
        if c < 2 or h < 1 or w < 1:
            raise InvariantError(f"need C >= 2 and a nonempty grid, got shape {probs.shape}")
        probs = probs.astype(np.float32, copy=True)
        if not np.all(np.isfinite(probs)):
            coord = _first_bad_pixel(~np.isfinite(probs))
            raise InvariantError(f"non-finite probability at (class,y,x)={coord}")
        if probs.min() < -_VALUE_SLACK or probs.max() > 1.0 + _VALUE_SLACK:
            coord = _first_bad_pixel((probs < -_VALUE_SLACK) | (probs > 1.0 + _VALUE_SLACK))
            raise InvariantError(f"probability out of [0,1] at (class,y,x)={coord}")
        np.clip(probs, 0.0, 1.0, out=probs)
        sums = probs.sum(axis=0, dtype=np.float64)
        err = np.abs(sums - 1.0)
        if err.max() > SIMPLEX_TOLERANCE:
            y, x = _first_bad_pixel(err > SIMPLEX_TOLERANCE)
            raise InvariantError(
                f"simplex violation at ({y},{x}): probabilities sum to {sums[y, x]:.6f}"
            )
        toofar = err > _RENORM_THRESHOLD
        if toofar.any():
            scale = np.where(toofar, sums, 1.0)
            probs = (probs / scale[None, :, :]).astype(np.float32)
        self.probs = _freeze(probs)

    @property
    def num_classes(self) -> int:
        return self.probs.shape[0]

    @property
    def height(self) -> int:
        return self.probs.shape[1]

    @property
    def width(self) -> int:
        return self.probs.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.probs.shape[1:]


@dataclass(eq=False)
class SampleStack:
    """N Monte-Carlo probability maps for one image.

    ``valid[n, y, x]`` is False where sample ``n`` carries no information at
    that pixel (only spatial test-time-augmentation inversion produces such
    pixels; every other source leaves the mask all-true).
    """

    samples: np.ndarray
    valid: np.ndarray | None = None

    def __post_init__(self):
        samples = np.asarray(self.samples)
        if samples.ndim != 4:
            raise InvariantError(f"sample stack must be (N, C, H, W), got shape {samples.shape}")
        n, c, h, w = samples.shape
        if n < 1:
            raise InvariantError("sample stack must hold at least one sample")
        samples = samples.astype(np.float32, copy=True)
        if not np.all(np.isfinite(samples)):
            coord = _first_bad_pixel(~np.isfinite(samples))
            raise InvariantError(f"non-finite probability at (sample,class,y,x)={coord}")
        if samples.min() < -_VALUE_SLACK or samples.max() > 1.0 + _VALUE_SLACK:
            raise InvariantError("probability out of [0,1] in sample stack")
        np.clip(samples, 0.0, 1.0, out=samples)
        sums = samples.sum(axis=1, dtype=np.float64)
        err = np.abs(sums - 1.0)
        if err.max() > SIMPLEX_TOLERANCE:
            coord = _first_bad_pixel(err > SIMPLEX_TOLERANCE)
            raise InvariantError(
                f"simplex violation at (sample,y,x)={coord}: sum {sums[coord]:.6f}"
            )
        toofar = err > _RENORM_THRESHOLD
        if toofar.any():
            scale = np.where(toofar, sums, 1.0)
            samples = (samples / scale[:, None, :, :]).astype(np.float32)

        if self.valid is None:
            valid = np.ones((n, h, w), dtype=bool)
        else:
            valid = np.asarray(self.valid)
            if valid.shape != (n, h, w):
                raise InvariantError(
                    f"validity mask shape {valid.shape} does not match samples {(n, h, w)}"
                )
            valid = valid.astype(bool, copy=True)
        self.samples = _freeze(samples)
        self.valid = _freeze(valid)

    @property
    def num_samples(self) -> int:
        return self.samples.shape[0]

    @property
    def num_classes(self) -> int:
        return self.samples.shape[1]

    @property
    def height(self) -> int:
        return self.samples.shape[2]

    @property
    def width(self) -> int:
        return self.samples.shape[3]

    @property
    def all_valid(self) -> bool:
        return bool(self.valid.all())

    def sample(self, index: int) -> ProbMap:
        return ProbMap(self.samples[index])


@dataclass(eq=False)
class ScalarMap:
    """Nonnegative per-pixel scalar field (entropy, uncertainty, indicators)."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise InvariantError(f"scalar grid must be 2D and nonempty, got shape {values.shape}")
        values = values.astype(np.float32, copy=True)
        if not np.all(np.isfinite(values)):
            coord = _first_bad_pixel(~np.isfinite(values))
            raise InvariantError(f"non-finite scalar at (y,x)={coord}")
        if values.min() < -1e-9:
            coord = _first_bad_pixel(values < -1e-9)
            raise InvariantError(f"negative scalar at (y,x)={coord}")
        np.maximum(values, 0.0, out=values)
        self.values = _freeze(values)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def one_hot(label_map: LabelMap) -> ProbMap:
    """Expand a label map to the probability map that puts mass 1 on each label."""
    c = label_map.num_classes
    probs = np.zeros((c, label_map.height, label_map.width), dtype=np.float32)
    rows, cols = np.indices(label_map.shape)
    probs[label_map.labels, rows, cols] = 1.0
    return ProbMap(probs)


def argmax_labels(prob_map: ProbMap) -> LabelMap:
    """Hard labels from a probability map; ties go to the lowest class index."""
    labels = np.argmax(prob_map.probs, axis=0).astype(np.uint8)
    return LabelMap(labels, prob_map.num_classes)


# ---------------------------------------------------------------------------
# NPY file IO
# ---------------------------------------------------------------------------

_KIND_SPECS = {
    "label": (2, np.uint8),
    "prob": (3, np.float32),
    "stack": (4, np.float32),
    "scalar": (2, np.float32),
}


def valid_mask_path(path: Path | str) -> Path:
    """Sibling file that stores a stack's validity mask, if one exists."""
    path = Path(path)
    return path.with_name(path.stem + ".valid.npy")


def _write_npy(arr: np.ndarray, path: Path) -> None:
    with open(path, "wb") as f:
        npy_format.write_array(f, np.ascontiguousarray(arr), version=(1, 0))


def _read_npy(path: Path, expected_dtype: np.dtype, expected_ndim: int) -> np.ndarray:
    if not path.exists():
        raise InvariantError(f"array file not found: {path}")
    try:
        arr = np.load(path, allow_pickle=False)
    except Exception as exc:
        raise InvariantError(f"malformed array file {path}: {exc}") from exc
    if arr.dtype != expected_dtype:
        raise InvariantError(
            f"{path}: expected dtype {np.dtype(expected_dtype).str}, found {arr.dtype.str}"
        )
    if arr.ndim != expected_ndim:
        raise InvariantError(f"{path}: expected {expected_ndim} dimensions, found {arr.ndim}")
    return arr


def peek_header(path: Path | str) -> tuple[tuple[int, ...], str]:
    """(shape, dtype string) of an NPY file without loading the payload."""
    path = Path(path)
    if not path.exists():
        raise InvariantError(f"array file not found: {path}")
    with open(path, "rb") as f:
        try:
            version = npy_format.read_magic(f)
            if version == (1, 0):
                shape, fortran, dtype = npy_format.read_array_header_1_0(f)
            else:
                shape, fortran, dtype = npy_format.read_array_header_2_0(f)
        except Exception as exc:
            raise InvariantError(f"malformed array file {path}: {exc}") from exc
    if fortran:
        raise InvariantError(f"{path}: fortran-order arrays are not supported")
    return shape, dtype.str


def write_array(value, path: Path | str) -> None:
    """Write a container to an NPY file (plus validity sibling for stacks)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(value, LabelMap):
        _write_npy(value.labels, path)
    elif isinstance(value, ProbMap):
        _write_npy(value.probs, path)
    elif isinstance(value, ScalarMap):
        _write_npy(value.values, path)
    elif isinstance(value, SampleStack):
        _write_npy(value.samples, path)
        mask_path = valid_mask_path(path)
        if value.all_valid:
            if mask_path.exists():
                mask_path.unlink()
        else:
            _write_npy(value.valid.astype(np.uint8), mask_path)
    else:
        raise InvariantError(f"cannot write object of type {type(value).__name__}")


def read_array(
    path: Path | str, expected_kind: str, num_classes: int | None = None
) -> LabelMap | ProbMap | SampleStack | ScalarMap:
    """Load and validate an array file.

    ``expected_kind`` is one of ``label``, ``prob``, ``stack``, ``scalar``.
    Label files do not record a class count, so ``num_classes`` may be given;
    otherwise ``max(label) + 2`` is assumed (the +2 keeps the two-class floor).
    """
    path = Path(path)
    if expected_kind not in _KIND_SPECS:
        raise InvariantError(f"unknown array kind {expected_kind!r}")
    ndim, dtype = _KIND_SPECS[expected_kind]
    arr = _read_npy(path, np.dtype(dtype), ndim)
    if expected_kind == "label":
        if num_classes is None:
            num_classes = max(int(arr.max(initial=0)) + 1, 2)
        return LabelMap(arr, num_classes)
    if expected_kind == "prob":
        return ProbMap(arr)
    if expected_kind == "scalar":
        return ScalarMap(arr)
    mask_path = valid_mask_path(path)
    valid = None
    if mask_path.exists():
        raw = _read_npy(mask_path, np.dtype(np.uint8), 3)
        valid = raw.astype(bool)
    return SampleStack(arr, valid)
