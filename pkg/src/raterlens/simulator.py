"""Synthetic cohorts: phantoms, style-parameterized raters, surrogate sampler.

The simulator provides everything the analysis pipeline needs without a
trained network or clinical data: muscle-like elliptical phantoms, raters
that over/under-segment and jitter boundaries according to a style, and a
stochastic surrogate "model" whose epistemic and aleatoric noise sources
are separately controllable (which no real network offers).

Statistical design of a default cohort:

* Each subject draws an atypicality scalar; anatomy jitter, rater boundary
  jitter (in linkage mode), and the surrogate's epistemic amplitude all
  scale with it.  Atypical subjects therefore produce both higher rater
  disagreement and higher model-knowledge uncertainty, while the aleatoric
  noise amplitude stays tied to the image noise level only.
* In linkage mode the rater jitter and the epistemic noise also share a
  per-subject smooth "difficulty" field, mixed with private fields, so the
  spatial patterns of disagreement coincide, not just the amplitudes.

All randomness flows through numpy SeedSequence streams keyed by
(cohort seed, subject index, stream id), so subjects can be generated in
parallel in any order with identical results.
"""

from __future__ import annotations

import dataclasses
import json
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .arrays import InvariantError, LabelMap, ProbMap, SampleStack, ScalarMap, write_array
from .fusion import average_gt, majority_vote
from .manifest import CohortManifest, ImageRecord, load_manifest, save_manifest
from .uncertainty import (
    TransformLimits,
    TransformParams,
    aggregate,
    align_tta_samples,
    sample_transforms,
)

__all__ = [
    "PhantomSpec",
    "RaterStyle",
    "SurrogateSpec",
    "generate_phantom",
    "simulate_rater",
    "simulate_samples",
    "build_cohort",
    "default_rater_styles",
    "calibrated_prediction",
    "overconfident_prediction",
    "smooth_field",
    "signed_distance",
    "cohort_spec_to_json",
    "cohort_spec_from_json",
    "CohortSpec",
]

# Smooth fields: seeded white noise blurred with a fixed-width Gaussian
# kernel, then standardized.  Width 8 px makes perturbations coherent over
# roughly an ellipse-quadrant, mimicking anatomical rather than pixel noise.
FIELD_SMOOTH_SIGMA = 8.0
FIELD_CLIP = 3.0

# SeedSequence stream ids (cohort seed, subject index, stream, ...).
_STREAM_SUBJECT = 0
_STREAM_PHANTOM = 1
_STREAM_DIFFICULTY = 2
_STREAM_RATER = 3
_STREAM_SURROGATE = 4
_STREAM_TRANSFORMS = 5

_SOURCE_IDS = {"ttd": 1, "ensemble": 2, "tta": 3}

BASE_TEXTURE_SIGMA = 0.03


def smooth_field(shape: tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """Unit-std smooth random field, clipped to +-FIELD_CLIP, float64.

    For a (C, H, W) shape each channel is blurred and standardized
    independently.
    """
    noise = rng.standard_normal(shape)
    if len(shape) == 2:
        field = ndimage.gaussian_filter(noise, FIELD_SMOOTH_SIGMA)
        field /= max(field.std(), 1e-12)
    else:
        field = ndimage.gaussian_filter(
            noise, (0,) * (len(shape) - 2) + (FIELD_SMOOTH_SIGMA, FIELD_SMOOTH_SIGMA)
        )
        flat = field.reshape(shape[0], -1)
        flat /= np.maximum(flat.std(axis=1, keepdims=True), 1e-12)
    return np.clip(field, -FIELD_CLIP, FIELD_CLIP)


def signed_distance(mask: np.ndarray) -> np.ndarray:
    """Signed Euclidean distance to the mask boundary: negative inside."""
    mask = mask.astype(bool)
    if not mask.any():
        return np.full(mask.shape, float(sum(mask.shape)), dtype=np.float64)
    if mask.all():
        return np.full(mask.shape, -float(sum(mask.shape)), dtype=np.float64)
    outside = ndimage.distance_transform_edt(~mask)
    inside = ndimage.distance_transform_edt(mask)
    return outside - inside


@dataclass(frozen=True)
class PhantomSpec:
    """Geometry of one synthetic subject.

    Ellipse parameters are drawn around a fixed template layout; the jitter
    amplitude scales with ``atypicality`` (0 reproduces the template
    exactly).  ``texture_sigma`` is the image's Gaussian texture noise level.
    """

    height: int = 128
    width: int = 128
    num_foreground_classes: int = 4
    atypicality: float = 1.0
    texture_sigma: float = BASE_TEXTURE_SIGMA

    def __post_init__(self):
        if self.height < 16 or self.width < 16:
            raise InvariantError("phantom grid must be at least 16x16")
        if self.num_foreground_classes < 1:
            raise InvariantError("need at least one foreground class")
        if self.atypicality < 0:
            raise InvariantError("atypicality must be >= 0")
        if self.texture_sigma < 0:
            raise InvariantError("texture_sigma must be >= 0")

    @property
    def num_classes(self) -> int:
        return self.num_foreground_classes + 1


@dataclass(frozen=True)
class RaterStyle:
    """Systematic boundary offset (bias, px) and smooth jitter magnitude."""

    bias: float = 0.0
    variance: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.variance < 0:
            raise InvariantError("rater variance must be >= 0")


@dataclass(frozen=True)
class SurrogateSpec:
    """Stochastic surrogate predictor parameters.

    Logits are ``sharpness`` times the negative per-class signed distance,
    plus a smooth epistemic field of amplitude ``epistemic_amp`` (redrawn
    per draw for ttd/ensemble, drawn once and co-transformed for tta), plus
    iid aleatoric noise of amplitude ``aleatoric_amp`` redrawn every sample.
    build_cohort scales epistemic_amp by subject atypicality and
    aleatoric_amp by the subject's relative image noise level before calling
    the sampler; standalone callers pass final amplitudes.

    With both amplitudes exactly 0 the surrogate is a deterministic model
    with nothing to hedge about and emits hard one-hot samples (the
    infinite-sharpness limit), so aggregate uncertainty is exactly zero.
    """

    sharpness: float = 4.0
    epistemic_amp: float = 2.0
    aleatoric_amp: float = 0.6
    seed: int = 0

    def __post_init__(self):
        if self.sharpness <= 0:
            raise InvariantError("sharpness must be > 0")
        if self.epistemic_amp < 0 or self.aleatoric_amp < 0:
            raise InvariantError("noise amplitudes must be >= 0")


def _template_ellipses(spec: PhantomSpec) -> list[tuple[float, float, float, float, float]]:
    """(cx, cy, semi_a, semi_b, angle_deg) per foreground class."""
    h, w = spec.height, spec.width
    sx, sy = w / 128.0, h / 128.0
    if spec.num_foreground_classes == 4:
        # Two small inner-lower ellipses and two large outer-upper ones,
        # mirrored left/right.
        return [
            (48.0 * sx, 80.0 * sy, 9.0 * sx, 13.0 * sy, 12.0),
            (80.0 * sx, 80.0 * sy, 9.0 * sx, 13.0 * sy, -12.0),
            (30.0 * sx, 46.0 * sy, 12.0 * sx, 17.0 * sy, 8.0),
            (98.0 * sx, 46.0 * sy, 12.0 * sx, 17.0 * sy, -8.0),
        ]
    out = []
    k = spec.num_foreground_classes
    radius = 0.30 * min(h, w)
    for i in range(k):
        ang = 2.0 * np.pi * i / k
        cx = w / 2.0 + radius * np.cos(ang)
        cy = h / 2.0 + radius * np.sin(ang)
        out.append((cx, cy, 0.09 * min(h, w), 0.13 * min(h, w), np.degrees(ang)))
    return out


def _render_ellipse(h, w, cx, cy, a, b, angle_deg) -> np.ndarray:
    ys, xs = np.indices((h, w), dtype=np.float64)
    t = np.radians(angle_deg)
    u = (xs - cx) * np.cos(t) + (ys - cy) * np.sin(t)
    v = -(xs - cx) * np.sin(t) + (ys - cy) * np.cos(t)
    return (u / a) ** 2 + (v / b) ** 2 <= 1.0


def generate_phantom(spec: PhantomSpec, seed) -> tuple[ScalarMap, LabelMap]:
    """Render one subject: intensity image plus true label map.

    Ellipse parameters are the template plus Gaussian jitter scaled by
    ``spec.atypicality``; overlaps resolve in favor of the lower class
    index.  A draw that leaves any class empty is regenerated (with a
    warning) from the next substream.
    """
    h, w = spec.height, spec.width
    template = _template_ellipses(spec)
    root = np.random.SeedSequence([_as_seed_int(seed), _STREAM_PHANTOM])
    geometry_ss, texture_ss = root.spawn(2)
    for attempt in range(20):
        rng = np.random.default_rng(geometry_ss.spawn(1)[0] if attempt else geometry_ss)
        labels = np.zeros((h, w), dtype=np.uint8)
        empty = False
        for c, (cx, cy, a, b, ang) in enumerate(template, start=1):
            # Centers and orientations move freely with atypicality; axis
            # jitter stays small so total boundary length (which sets the
            # scale of every boundary-band observable downstream) is nearly
            # constant across subjects.
            jitter = rng.normal(0.0, 1.0, size=5)
            cx2 = cx + spec.atypicality * 1.5 * jitter[0]
            cy2 = cy + spec.atypicality * 1.5 * jitter[1]
            a2 = a * float(np.exp(spec.atypicality * 0.03 * jitter[2]))
            b2 = b * float(np.exp(spec.atypicality * 0.03 * jitter[3]))
            ang2 = ang + spec.atypicality * 5.0 * jitter[4]
            mask = _render_ellipse(h, w, cx2, cy2, a2, b2, ang2) & (labels == 0)
            if not mask.any():
                empty = True
                break
            labels[mask] = c
        if empty:
            warnings.warn(
                f"phantom attempt {attempt} left class {c} empty; regenerating",
                stacklevel=2,
            )
            continue
        base = np.full((h, w), 0.2)
        for c in range(1, spec.num_classes):
            base[labels == c] = 0.45 + 0.08 * c
        texture_rng = np.random.default_rng(texture_ss)
        image = base + texture_rng.normal(0.0, spec.texture_sigma, size=(h, w))
        return ScalarMap(np.maximum(image, 0.0).astype(np.float32)), LabelMap(
            labels, spec.num_classes
        )
    raise InvariantError("could not render a phantom with all classes nonempty in 20 attempts")


def _as_seed_int(seed) -> int:
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    raise InvariantError(f"seed must be an integer, got {type(seed).__name__}")


def _class_distances(true_labels: LabelMap) -> np.ndarray:
    """(C-1, H, W) signed distances, one per foreground class."""
    return np.stack(
        [signed_distance(true_labels.labels == c) for c in range(1, true_labels.num_classes)]
    )


def simulate_rater(
    true_labels: LabelMap,
    style: RaterStyle,
    shared_field: np.ndarray | None = None,
    link_weight: float = 0.7,
) -> LabelMap:
    """Annotate the phantom the way a rater with the given style would.

    Each foreground class claims the pixels where
    ``bias + variance * field - signed_distance > 0``; ties and the
    background are resolved by a per-pixel argmax with background at score
    0.  ``field`` is the rater's private smooth field, optionally mixed
    with a ``shared_field`` (one channel per foreground class) by
    ``link_weight`` so raters struggle in the same places.
    """
    c = true_labels.num_classes
    h, w = true_labels.shape
    sd = _class_distances(true_labels)
    if style.variance > 0.0:
        rng = np.random.default_rng(np.random.SeedSequence([style.seed, _STREAM_RATER]))
        field = smooth_field((c - 1, h, w), rng)
        if shared_field is not None:
            if shared_field.shape != (c - 1, h, w):
                raise InvariantError(
                    f"shared field shape {shared_field.shape}, expected {(c - 1, h, w)}"
                )
            mix = link_weight * shared_field + np.sqrt(1.0 - link_weight**2) * field
            field = np.clip(mix, -FIELD_CLIP, FIELD_CLIP)
        perturb = style.variance * field
    else:
        perturb = np.zeros((c - 1, h, w))
    scores = np.zeros((c, h, w))
    scores[1:] = style.bias + perturb - sd
    return LabelMap(np.argmax(scores, axis=0).astype(np.uint8), c)


def _surrogate_logits(true_labels: LabelMap, sharpness: float) -> np.ndarray:
    """(C, H, W) logits: class logit falls with distance into the background."""
    sd = _class_distances(true_labels)
    logits = np.empty((true_labels.num_classes, *true_labels.shape))
    logits[0] = sharpness * sd.min(axis=0)
    logits[1:] = -sharpness * sd
    return logits


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=0, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=0, keepdims=True)


def _epistemic_field(
    shape: tuple[int, int, int],
    seed_seq: np.random.SeedSequence,
    shared_field: np.ndarray | None,
    link_weight: float,
) -> np.ndarray:
    field = smooth_field(shape, np.random.default_rng(seed_seq))
    if shared_field is None:
        return field
    c1, h, w = shape
    shared = np.zeros(shape)
    # The shared difficulty field covers foreground channels; the
    # background channel keeps a purely private field.
    shared[1:] = shared_field
    mixed = link_weight * shared + np.sqrt(1.0 - link_weight**2) * field
    mixed[0] = field[0]
    return np.clip(mixed, -FIELD_CLIP, FIELD_CLIP)


def _transform_logits(logits: np.ndarray, t: TransformParams, sharpness: float) -> np.ndarray:
    """Resample logit channels onto the transformed grid (what the model sees)."""
    from .uncertainty import _grid_xy, _inverse_points, _resample  # shared geometry

    if t.is_spatial_identity:
        return logits
    c, h, w = logits.shape
    src = _inverse_points(_grid_xy(h, w), t, h, w)
    far = sharpness * float(max(h, w))
    out = np.empty_like(logits)
    out[0] = _resample(logits[0], src, fill=far)
    for k in range(1, c):
        out[k] = _resample(logits[k], src, fill=-far)
    return out


def simulate_samples(
    true_labels: LabelMap,
    surrogate: SurrogateSpec,
    source: str,
    n: int = 10,
    transforms: list[TransformParams] | None = None,
    shared_field: np.ndarray | None = None,
    link_weight: float = 0.7,
) -> SampleStack:
    """Draw n Monte-Carlo predictions from the surrogate.

    ttd/ensemble: every draw gets a fresh epistemic field and fresh
    aleatoric noise on the original grid (all samples valid).  tta: one
    epistemic field is drawn and co-transformed with the input; each sample
    is predicted on its transformed grid, gets fresh aleatoric noise there,
    and is then inverse-mapped back, producing validity masks.
    """
    if source not in _SOURCE_IDS:
        raise InvariantError(f"unknown sample source {source!r}")
    if n < 1:
        raise InvariantError("need at least one sample")
    if source == "tta":
        if transforms is None or len(transforms) != n:
            raise InvariantError(f"tta needs exactly {n} transforms")
    elif transforms is not None:
        raise InvariantError(f"{source} does not take transforms")

    c = true_labels.num_classes
    h, w = true_labels.shape
    logits = _surrogate_logits(true_labels, surrogate.sharpness)
    hard = surrogate.epistemic_amp == 0.0 and surrogate.aleatoric_amp == 0.0
    root = np.random.SeedSequence([surrogate.seed, _STREAM_SURROGATE, _SOURCE_IDS[source]])
    epi_ss, ale_ss = root.spawn(2)
    epi_streams = epi_ss.spawn(n)
    ale_streams = ale_ss.spawn(n)

    def _probs(sample_logits: np.ndarray) -> np.ndarray:
        if hard:
            one_hot = np.zeros_like(sample_logits, dtype=np.float32)
            winners = np.argmax(sample_logits, axis=0)
            rows, cols = np.indices((h, w))
            one_hot[winners, rows, cols] = 1.0
            return one_hot
        return _softmax(sample_logits).astype(np.float32)

    if source in ("ttd", "ensemble"):
        samples = np.empty((n, c, h, w), dtype=np.float32)
        for j in range(n):
            draw = logits
            if surrogate.epistemic_amp > 0.0:
                field = _epistemic_field((c, h, w), epi_streams[j], shared_field, link_weight)
                draw = draw + surrogate.epistemic_amp * field
            if surrogate.aleatoric_amp > 0.0:
                rng = np.random.default_rng(ale_streams[j])
                draw = draw + surrogate.aleatoric_amp * rng.standard_normal((c, h, w))
            samples[j] = _probs(draw)
        return SampleStack(samples)

    base = logits
    if surrogate.epistemic_amp > 0.0:
        field = _epistemic_field((c, h, w), epi_streams[0], shared_field, link_weight)
        base = base + surrogate.epistemic_amp * field
    maps = []
    for j, t in enumerate(transforms):
        draw = _transform_logits(base, t, surrogate.sharpness)
        if surrogate.aleatoric_amp > 0.0:
            rng = np.random.default_rng(ale_streams[j])
            draw = draw + surrogate.aleatoric_amp * rng.standard_normal((c, h, w))
        maps.append(ProbMap(_probs(draw)))
    return align_tta_samples(maps, transforms)


def default_rater_styles(num_raters: int) -> list[RaterStyle]:
    """Spread of styles: under-, neutral and over-segmenters with jitter.

    Biases below one pixel would vanish against integer-valued signed
    distances, so the spread uses +-1.3 px endpoints.
    """
    if num_raters < 1:
        raise InvariantError("need at least one rater")
    if num_raters == 1:
        return [RaterStyle(bias=0.0, variance=1.0)]
    biases = np.linspace(-1.3, 1.3, num_raters)
    variances = [1.0, 1.2, 0.9]
    # distinct seeds, or direct calls would share one perturbation field
    return [
        RaterStyle(bias=float(b), variance=variances[i % len(variances)], seed=i)
        for i, b in enumerate(biases)
    ]


def calibrated_prediction(raters: list[LabelMap], smoothing: float = 0.005) -> ProbMap:
    """Idealized variability-preserving model: rater frequencies, lightly
    mixed with the uniform distribution so the map is soft everywhere.

    Smoothing stays small so the entropy of the result tracks gt_entropy
    closely even where raters are unanimous.
    """
    if not 0.0 <= smoothing < 1.0:
        raise InvariantError("smoothing must lie in [0, 1)")
    avg = average_gt(raters)
    c = avg.num_classes
    probs = (1.0 - smoothing) * avg.probs.astype(np.float64) + smoothing / c
    return ProbMap(probs.astype(np.float32))


def overconfident_prediction(raters: list[LabelMap]) -> ProbMap:
    """Idealized majority-vote-trained model: probability 1 on the fused label."""
    from .arrays import one_hot

    return one_hot(majority_vote(raters))


@dataclass(frozen=True)
class CohortSpec:
    """Bundle of generation parameters accepted by the CLI as a JSON file."""

    phantom: PhantomSpec = PhantomSpec()
    rater_styles: tuple[RaterStyle, ...] = ()
    surrogate: SurrogateSpec = SurrogateSpec()
    linkage: bool = True
    noise_coupling: bool = False
    link_weight: float = 0.7
    num_samples: int = 10
    atypicality_range: tuple[float, float] = (0.25, 2.0)
    texture_sigma_range: tuple[float, float] | None = None
    transform_limits: TransformLimits = TransformLimits()


def cohort_spec_to_json(spec: CohortSpec, path: Path | str | None = None) -> str:
    doc = {
        "phantom": dataclasses.asdict(spec.phantom),
        "rater_styles": [dataclasses.asdict(s) for s in spec.rater_styles],
        "surrogate": dataclasses.asdict(spec.surrogate),
        "linkage": spec.linkage,
        "noise_coupling": spec.noise_coupling,
        "link_weight": spec.link_weight,
        "num_samples": spec.num_samples,
        "atypicality_range": list(spec.atypicality_range),
        "texture_sigma_range": (
            list(spec.texture_sigma_range) if spec.texture_sigma_range else None
        ),
        "transform_limits": dataclasses.asdict(spec.transform_limits),
    }
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def cohort_spec_from_json(source: Path | str) -> CohortSpec:
    try:
        doc = json.loads(Path(source).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InvariantError(f"cannot read cohort spec {source}: {exc}") from exc
    if not isinstance(doc, dict):
        raise InvariantError("cohort spec must be a JSON object")
    defaults = CohortSpec()
    try:
        return CohortSpec(
            phantom=PhantomSpec(**doc.get("phantom", {})),
            rater_styles=tuple(RaterStyle(**s) for s in doc.get("rater_styles", [])),
            surrogate=SurrogateSpec(**doc.get("surrogate", {})),
            linkage=bool(doc.get("linkage", defaults.linkage)),
            noise_coupling=bool(doc.get("noise_coupling", defaults.noise_coupling)),
            link_weight=float(doc.get("link_weight", defaults.link_weight)),
            num_samples=int(doc.get("num_samples", defaults.num_samples)),
            atypicality_range=tuple(doc.get("atypicality_range", defaults.atypicality_range)),
            texture_sigma_range=(
                tuple(doc["texture_sigma_range"])
                if doc.get("texture_sigma_range")
                else None
            ),
            transform_limits=TransformLimits(**doc.get("transform_limits", {})),
        )
    except TypeError as exc:
        raise InvariantError(f"bad cohort spec field: {exc}") from exc


def _subject_seed(seed: int, subject: int, stream: int, *extra: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, subject, stream, *extra])


def _derive_int(ss: np.random.SeedSequence) -> int:
    return int(ss.generate_state(1, np.uint64)[0])


def _build_subject(
    subject: int,
    spec: CohortSpec,
    seed: int,
    out_dir: Path,
) -> ImageRecord:
    subject_id = f"s{subject:03d}"
    sdir = out_dir / "subjects" / subject_id
    sdir.mkdir(parents=True, exist_ok=True)

    rng = np.random.default_rng(_subject_seed(seed, subject, _STREAM_SUBJECT))
    lo, hi = spec.atypicality_range
    atypicality = float(rng.uniform(lo, hi))
    if spec.texture_sigma_range is not None:
        tlo, thi = spec.texture_sigma_range
        texture_sigma = float(rng.uniform(tlo, thi))
    else:
        texture_sigma = spec.phantom.texture_sigma

    phantom = dataclasses.replace(
        spec.phantom, atypicality=atypicality, texture_sigma=texture_sigma
    )
    image, true_labels = generate_phantom(
        phantom, _derive_int(_subject_seed(seed, subject, _STREAM_PHANTOM))
    )
    write_array(image, sdir / "image.npy")
    write_array(true_labels, sdir / "true_labels.npy")

    c = phantom.num_classes
    shared = None
    if spec.linkage:
        shared = smooth_field(
            (c - 1, phantom.height, phantom.width),
            np.random.default_rng(_subject_seed(seed, subject, _STREAM_DIFFICULTY)),
        )

    noise_scale = texture_sigma / max(spec.phantom.texture_sigma, 1e-12)
    rater_paths = []
    raters = []
    for r, style in enumerate(spec.rater_styles):
        variance = style.variance * (atypicality if spec.linkage else 1.0)
        if spec.noise_coupling:
            variance *= noise_scale
        eff = dataclasses.replace(
            style,
            variance=variance,
            seed=_derive_int(_subject_seed(seed, subject, _STREAM_RATER, r)),
        )
        mask = simulate_rater(true_labels, eff, shared_field=shared, link_weight=spec.link_weight)
        raters.append(mask)
        path = sdir / f"rater_{r}.npy"
        write_array(mask, path)
        rater_paths.append(path)

    fused = majority_vote(raters)
    fused_path = sdir / "fused_majority.npy"
    write_array(fused, fused_path)

    surrogate = dataclasses.replace(
        spec.surrogate,
        epistemic_amp=spec.surrogate.epistemic_amp * atypicality,
        aleatoric_amp=spec.surrogate.aleatoric_amp * noise_scale,
        seed=_derive_int(_subject_seed(seed, subject, _STREAM_SURROGATE)),
    )
    stack_paths = {}
    ttd_stack = None
    for source in ("ttd", "ensemble", "tta"):
        transforms = None
        if source == "tta":
            transforms = sample_transforms(
                spec.num_samples,
                spec.transform_limits,
                _derive_int(_subject_seed(seed, subject, _STREAM_TRANSFORMS)),
            )
        stack = simulate_samples(
            true_labels,
            surrogate,
            source,
            spec.num_samples,
            transforms=transforms,
            shared_field=shared,
            link_weight=spec.link_weight,
        )
        if source == "ttd":
            ttd_stack = stack
        path = sdir / f"stack_{source}.npy"
        write_array(stack, path)
        stack_paths[source] = path

    # The manifest's single prediction is the ttd aggregate mean, the
    # "samples averaged to produce a final prediction" convention.
    prediction = aggregate(ttd_stack, "ttd").mean_prediction
    pred_path = sdir / "prediction.npy"
    write_array(prediction, pred_path)

    meta = {
        "id": subject_id,
        "atypicality": atypicality,
        "texture_sigma": texture_sigma,
    }
    (sdir / "subject_meta.json").write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return ImageRecord(
        id=subject_id,
        rater_mask_paths=rater_paths,
        fused_gt_path=fused_path,
        sample_stack_paths=stack_paths,
        prediction_path=pred_path,
    )


def build_cohort(
    num_subjects: int,
    rater_styles: list[RaterStyle],
    surrogate: SurrogateSpec,
    seed: int,
    out_dir: Path | str,
    phantom: PhantomSpec | None = None,
    linkage: bool = True,
    noise_coupling: bool = False,
    link_weight: float = 0.7,
    num_samples: int = 10,
    atypicality_range: tuple[float, float] = (0.25, 2.0),
    texture_sigma_range: tuple[float, float] | None = None,
    transform_limits: TransformLimits | None = None,
    threads: int = 1,
    class_names: list[str] | None = None,
) -> CohortManifest:
    """Generate a full cohort directory and its manifest.

    Every subject's randomness is keyed by (seed, subject index), so the
    thread count changes wall time only, never a single byte of output.
    Returns the loaded (hence fully validated) manifest.
    """
    if num_subjects < 1:
        raise InvariantError("need at least one subject")
    if not rater_styles:
        raise InvariantError("need at least one rater style")
    spec = CohortSpec(
        phantom=phantom or PhantomSpec(),
        rater_styles=tuple(rater_styles),
        surrogate=surrogate,
        linkage=linkage,
        noise_coupling=noise_coupling,
        link_weight=link_weight,
        num_samples=num_samples,
        atypicality_range=atypicality_range,
        texture_sigma_range=texture_sigma_range,
        transform_limits=transform_limits or TransformLimits(),
    )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cohort_spec_to_json(spec, out_dir / "cohort_spec.json")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(
                pool.map(lambda s: _build_subject(s, spec, seed, out_dir), range(num_subjects))
            )
    else:
        records = [_build_subject(s, spec, seed, out_dir) for s in range(num_subjects)]

    c = spec.phantom.num_classes
    if class_names is None:
        if spec.phantom.num_foreground_classes == 4:
            class_names = ["background", "right_mf", "left_mf", "right_es", "left_es"]
        else:
            class_names = ["background"] + [f"region_{i}" for i in range(1, c)]
    manifest = CohortManifest(
        num_classes=c, class_names=class_names, images=records, root=out_dir.resolve()
    )
    path = save_manifest(manifest, out_dir / "manifest.json")
    return load_manifest(path)
