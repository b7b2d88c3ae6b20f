"""Monte-Carlo uncertainty engine.

Aggregates a stack of N sampled probability maps (from test-time dropout,
test-time augmentation, or a deep ensemble) into a final mean prediction and
an uncertainty map, defined as the entropy of the mean.

For spatial test-time augmentation the sampled maps live on transformed
image grids; this module also owns the forward transform applied to inputs
and the inverse mapping that re-aligns each sampled map to the original
grid before averaging, with a per-pixel validity mask marking where the
inverse had nothing to look at.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
from scipy import ndimage

from .arrays import InvariantError, ProbMap, SampleStack, ScalarMap
from .variability import entropy_map

__all__ = [
    "TransformParams",
    "TransformLimits",
    "UncertaintyResult",
    "aggregate",
    "sample_transforms",
    "apply_transform",
    "transform_probs_forward",
    "invert_prediction",
    "transforms_to_json",
    "transforms_from_json",
]


@dataclass(frozen=True)
class TransformLimits:
    """Bounds for uniform transform sampling (all symmetric about 0 except noise)."""

    max_rotation_deg: float = 10.0
    max_translate_px: float = 10.0
    max_intensity_shift: float = 0.1
    max_noise_sigma: float = 0.05

    def __post_init__(self):
        if min(self.max_rotation_deg, self.max_translate_px) < 0:
            raise InvariantError("transform limits must be nonnegative")
        if min(self.max_intensity_shift, self.max_noise_sigma) < 0:
            raise InvariantError("transform limits must be nonnegative")


@dataclass(frozen=True)
class TransformParams:
    """One augmentation draw.

    The forward map sends an input-grid point p to R(p - c) + c + d, where R
    rotates by ``rotation_deg`` (positive = counterclockwise in (x, y) with y
    pointing down the rows), c is the image center, and d =
    (translate_x, translate_y).  ``seed`` drives only the Gaussian noise.
    """

    rotation_deg: float
    translate_x: float
    translate_y: float
    intensity_shift: float
    noise_sigma: float
    seed: int

    def __post_init__(self):
        if self.noise_sigma < 0:
            raise InvariantError(f"noise_sigma must be >= 0, got {self.noise_sigma}")

    @property
    def is_spatial_identity(self) -> bool:
        return self.rotation_deg == 0.0 and self.translate_x == 0.0 and self.translate_y == 0.0

    @property
    def is_identity(self) -> bool:
        return (
            self.is_spatial_identity
            and self.intensity_shift == 0.0
            and self.noise_sigma == 0.0
        )


@dataclass(eq=False)
class UncertaintyResult:
    """Mean prediction plus its entropy map for one image and one source."""

    mean_prediction: ProbMap
    uncertainty: ScalarMap
    source: str
    num_samples: int


def aggregate(stack: SampleStack, source: str) -> UncertaintyResult:
    """Mean over valid samples per pixel; uncertainty = entropy of the mean.

    Pixels where no sample is valid get the uniform distribution (maximum
    entropy: the stack says nothing about them).
    """
    if source not in ("tta", "ttd", "ensemble"):
        raise InvariantError(f"unknown sample source {source!r}")
    n, c, h, w = stack.samples.shape
    valid = stack.valid
    counts = valid.sum(axis=0)
    total = np.where(
        valid[:, None, :, :], stack.samples.astype(np.float64), 0.0
    ).sum(axis=0)
    safe = np.maximum(counts, 1)[None, :, :]
    mean = total / safe
    mean = np.where(counts[None, :, :] == 0, 1.0 / c, mean)
    mean_map = ProbMap(mean.astype(np.float32))
    return UncertaintyResult(
        mean_prediction=mean_map,
        uncertainty=entropy_map(mean_map),
        source=source,
        num_samples=n,
    )


def sample_transforms(
    n: int, limits: TransformLimits | None = None, seed: int = 0
) -> list[TransformParams]:
    """Draw n independent transforms uniformly within the limits.

    Per draw the generator is consumed in a fixed order (rotation, dx, dy,
    intensity shift, noise sigma, noise seed), so trimming or extending n
    never changes earlier draws.
    """
    if n < 1:
        raise InvariantError("need at least one transform")
    limits = limits or TransformLimits()
    rng = np.random.Generator(np.random.Philox(key=seed))
    out = []
    for _ in range(n):
        rot = float(rng.uniform(-limits.max_rotation_deg, limits.max_rotation_deg))
        dx = float(rng.uniform(-limits.max_translate_px, limits.max_translate_px))
        dy = float(rng.uniform(-limits.max_translate_px, limits.max_translate_px))
        shift = float(rng.uniform(-limits.max_intensity_shift, limits.max_intensity_shift))
        sigma = float(rng.uniform(0.0, limits.max_noise_sigma))
        noise_seed = int(rng.integers(0, 2**63, dtype=np.uint64))
        if limits.max_rotation_deg == 0.0:
            rot = 0.0
        if limits.max_translate_px == 0.0:
            dx = dy = 0.0
        if limits.max_intensity_shift == 0.0:
            shift = 0.0
        if limits.max_noise_sigma == 0.0:
            sigma = 0.0
        out.append(
            TransformParams(
                rotation_deg=rot,
                translate_x=dx,
                translate_y=dy,
                intensity_shift=shift,
                noise_sigma=sigma,
                seed=noise_seed,
            )
        )
    return out


def _rotation(deg: float) -> np.ndarray:
    a = math.radians(deg)
    return np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])


def _grid_xy(h: int, w: int) -> np.ndarray:
    """(2, H, W) array of (x, y) pixel coordinates."""
    ys, xs = np.indices((h, w), dtype=np.float64)
    return np.stack([xs, ys])


def _forward_points(points: np.ndarray, t: TransformParams, h: int, w: int) -> np.ndarray:
    """Apply the forward map T(p) = R(p - c) + c + d to (2, ...) xy points."""
    c = np.array([(w - 1) / 2.0, (h - 1) / 2.0]).reshape(2, 1, 1)
    d = np.array([t.translate_x, t.translate_y]).reshape(2, 1, 1)
    r = _rotation(t.rotation_deg)
    flat = (points - c).reshape(2, -1)
    moved = r @ flat
    return moved.reshape(points.shape) + c + d


def _inverse_points(points: np.ndarray, t: TransformParams, h: int, w: int) -> np.ndarray:
    """Apply T^-1(q) = R^T (q - c - d) + c."""
    c = np.array([(w - 1) / 2.0, (h - 1) / 2.0]).reshape(2, 1, 1)
    d = np.array([t.translate_x, t.translate_y]).reshape(2, 1, 1)
    r = _rotation(t.rotation_deg).T
    flat = (points - c - d).reshape(2, -1)
    moved = r @ flat
    return moved.reshape(points.shape) + c


def _resample(plane: np.ndarray, src_xy: np.ndarray, fill: float) -> np.ndarray:
    """Bilinear lookup of plane at (x, y) source coordinates, constant fill."""
    coords = np.stack([src_xy[1], src_xy[0]])  # map_coordinates wants (row, col)
    return ndimage.map_coordinates(
        plane.astype(np.float64), coords, order=1, mode="constant", cval=fill
    )


def _inside(src_xy: np.ndarray, h: int, w: int) -> np.ndarray:
    eps = 1e-9
    return (
        (src_xy[0] >= -eps)
        & (src_xy[0] <= w - 1 + eps)
        & (src_xy[1] >= -eps)
        & (src_xy[1] <= h - 1 + eps)
    )


def apply_transform(image: ScalarMap, t: TransformParams) -> ScalarMap:
    """Augment an intensity image: rotate/translate, shift intensity, add noise.

    The output at pixel q samples the input at T^-1(q) with bilinear
    interpolation (so the image content visibly rotates by +rotation_deg and
    shifts by +d); out-of-view pixels are filled with 0.  Values are clipped
    at 0 after the intensity shift and noise.  Identity parameters return
    the input bit-exactly, skipping the resampling path.
    """
    if t.is_identity:
        return image
    h, w = image.shape
    if t.is_spatial_identity:
        values = image.values.astype(np.float64)
    else:
        src = _inverse_points(_grid_xy(h, w), t, h, w)
        values = _resample(image.values, src, fill=0.0)
    if t.intensity_shift != 0.0:
        values = values + t.intensity_shift
    if t.noise_sigma > 0.0:
        rng = np.random.Generator(np.random.Philox(key=t.seed))
        values = values + rng.normal(0.0, t.noise_sigma, size=values.shape)
    return ScalarMap(np.maximum(values, 0.0).astype(np.float32))


def transform_probs_forward(p: ProbMap, t: TransformParams) -> ProbMap:
    """Move a probability map onto the transformed grid (no intensity ops).

    Used by simulators that co-transform ground-truth-derived fields with
    the augmented input.  Out-of-view pixels get the uniform distribution.
    """
    if t.is_spatial_identity:
        return p
    c, h, w = p.probs.shape
    src = _inverse_points(_grid_xy(h, w), t, h, w)
    planes = [_resample(p.probs[k], src, fill=1.0 / c) for k in range(c)]
    stacked = np.stack(planes)
    inside = _inside(src, h, w)
    sums = stacked.sum(axis=0)
    stacked = np.where(sums > 0.5, stacked / np.maximum(sums, 1e-12), 1.0 / c)
    stacked = np.where(inside[None], stacked, 1.0 / c)
    return ProbMap(stacked.astype(np.float32))


def invert_prediction(p: ProbMap, t: TransformParams) -> tuple[ProbMap, np.ndarray]:
    """Map a prediction made on the transformed grid back to the original.

    The value at original-grid pixel q is read from the prediction at T(q)
    with bilinear interpolation, channels renormalized afterwards.  Pixels
    whose forward image T(q) falls outside the grid are invalid: they get
    the uniform distribution and False in the returned (H, W) mask.
    Intensity shift and noise need no inversion.
    """
    c, h, w = p.probs.shape
    if t.is_spatial_identity:
        return p, np.ones((h, w), dtype=bool)
    src = _forward_points(_grid_xy(h, w), t, h, w)
    valid = _inside(src, h, w)
    planes = [_resample(p.probs[k], src, fill=0.0) for k in range(c)]
    stacked = np.stack(planes)
    sums = stacked.sum(axis=0)
    ok = valid & (sums > 0.5)
    stacked = np.where(ok[None], stacked / np.maximum(sums, 1e-12), 1.0 / c)
    return ProbMap(stacked.astype(np.float32)), ok


def align_tta_samples(
    maps: list[ProbMap], transforms: list[TransformParams]
) -> SampleStack:
    """Invert each transformed-grid prediction and stack with validity masks."""
    if len(maps) != len(transforms):
        raise InvariantError(
            f"{len(maps)} sample maps but {len(transforms)} transforms"
        )
    samples = []
    masks = []
    for m, t in zip(maps, transforms):
        inv, ok = invert_prediction(m, t)
        samples.append(inv.probs)
        masks.append(ok)
    return SampleStack(np.stack(samples), np.stack(masks))


def transforms_to_json(
    transforms: list[TransformParams], path: Path | str | None = None
) -> str:
    """Serialize transforms so an external inference harness can replay them."""
    doc = [asdict(t) for t in transforms]
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def transforms_from_json(source: Path | str) -> list[TransformParams]:
    source = Path(source)
    try:
        doc = json.loads(source.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InvariantError(f"cannot read transform list {source}: {exc}") from exc
    if not isinstance(doc, list):
        raise InvariantError("transform list JSON must be an array")
    fields = ("rotation_deg", "translate_x", "translate_y", "intensity_shift", "noise_sigma")
    out = []
    for k, rec in enumerate(doc):
        if not isinstance(rec, dict) or any(f not in rec for f in (*fields, "seed")):
            raise InvariantError(f"transform entry {k} is missing required fields")
        out.append(
            TransformParams(
                rotation_deg=float(rec["rotation_deg"]),
                translate_x=float(rec["translate_x"]),
                translate_y=float(rec["translate_y"]),
                intensity_shift=float(rec["intensity_shift"]),
                noise_sigma=float(rec["noise_sigma"]),
                seed=int(rec["seed"]),
            )
        )
    return out
