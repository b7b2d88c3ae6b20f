"""Inter-rater variability measurement and preservation metrics.

Variability of a label distribution is measured by pixel-wise Shannon
entropy.  Applied to the rater-frequency map (``gt_entropy``) it quantifies
how much the raters disagree; applied to a model's softmax output
(``prediction_entropy``) it quantifies how much of that disagreement the
model reproduces.  Preservation is scored per class by the Brier score
between the two distributions.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .arrays import InvariantError, LabelMap, ProbMap, ScalarMap
from .fusion import average_gt

__all__ = [
    "entropy_map",
    "gt_entropy",
    "prediction_entropy",
    "BrierReport",
    "brier_score",
]


def entropy_values(probs: np.ndarray, normalized: bool = False) -> np.ndarray:
    """Pixel-wise Shannon entropy of a (C, H, W) array, float64, natural log."""
    p = probs.astype(np.float64, copy=False)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0.0, p * np.log(p), 0.0)
    h = -terms.sum(axis=0)
    np.maximum(h, 0.0, out=h)
    if normalized:
        h /= np.log(probs.shape[0])
    return h


def entropy_map(p: ProbMap, normalized: bool = False) -> ScalarMap:
    """Per-pixel entropy H = -sum_c p_c ln p_c, with 0 ln 0 taken as 0.

    With ``normalized`` the map is divided by ln C so values live in [0, 1]
    regardless of the class count.
    """
    return ScalarMap(entropy_values(p.probs, normalized))


def gt_entropy(raters: list[LabelMap], normalized: bool = False) -> ScalarMap:
    """Inter-rater variability map: entropy of the per-pixel rater frequencies."""
    return entropy_map(average_gt(raters), normalized)


def prediction_entropy(p: ProbMap, normalized: bool = False) -> ScalarMap:
    """Entropy of a model's softmax output (same math as entropy_map).

    Kept as a named operation so reports can label it as the prediction-side
    variability, distinct from the rater-side map.
    """
    return entropy_map(p, normalized)


@dataclass(eq=False)
class BrierReport:
    """Class-wise Brier scores over a cohort.

    Each value is the mean over images of the per-image voxel-mean squared
    difference between the rater-frequency distribution and the prediction,
    for that class channel.
    """

    per_class: list[float]
    num_images: int
    num_voxels_per_image: int
    class_names: list[str] | None = None

    def __post_init__(self):
        for c, v in enumerate(self.per_class):
            if not (0.0 <= v <= 1.0 + 1e-9):
                raise InvariantError(f"Brier value for class {c} outside [0,1]: {v}")

    def name_for(self, c: int) -> str:
        if self.class_names is not None and c < len(self.class_names):
            return self.class_names[c]
        return f"class_{c}"

    def to_json(self, path: Path | str | None = None) -> str:
        doc = {
            "per_class": [
                {"class_index": c, "class_name": self.name_for(c), "brier": v}
                for c, v in enumerate(self.per_class)
            ],
            "num_images": self.num_images,
            "num_voxels_per_image": self.num_voxels_per_image,
        }
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def to_csv(self, path: Path | str | None = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["class_index", "class_name", "brier"])
        for c, v in enumerate(self.per_class):
            writer.writerow([c, self.name_for(c), repr(float(v))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def brier_score(
    cohort: list[tuple[ProbMap, ProbMap]],
    class_names: list[str] | None = None,
    foreground_only: bool = False,
) -> BrierReport:
    """Class-wise Brier score between rater frequencies and predictions.

    ``cohort`` pairs each image's average-GT distribution with the model's
    probability map.  For class c the score is

        (1/N_image) * sum_k [ (1/N_voxel) * sum_i (y_ikc - yhat_ikc)^2 ]

    By default every voxel of every image contributes (background voxels
    contribute zeros on foreground channels).  ``foreground_only`` restricts
    each image's inner mean to voxels where at least one rater marked
    foreground, a sensitivity-analysis variant, not the default.
    """
    if not cohort:
        raise InvariantError("brier_score needs at least one (gt, prediction) pair")
    c0 = cohort[0][0].num_classes
    shape0 = cohort[0][0].shape
    for k, (gt, pred) in enumerate(cohort):
        if gt.num_classes != c0 or pred.num_classes != c0:
            raise InvariantError(f"image {k}: class count differs from image 0")
        if gt.shape != pred.shape:
            raise InvariantError(f"image {k}: GT shape {gt.shape} != prediction {pred.shape}")
        if gt.shape != shape0:
            raise InvariantError(f"image {k}: shape {gt.shape} differs from image 0 {shape0}")

    n_voxel = shape0[0] * shape0[1]
    acc = np.zeros(c0, dtype=np.float64)
    for gt, pred in cohort:
        sq = (gt.probs.astype(np.float64) - pred.probs.astype(np.float64)) ** 2
        if foreground_only:
            fg = gt.probs[0] < 1.0 - 1e-9  # some rater voted a nonbackground class
            count = int(fg.sum())
            if count == 0:
                raise InvariantError("foreground_only requested on an all-background image")
            acc += sq[:, fg].mean(axis=1)
        else:
            acc += sq.reshape(c0, -1).mean(axis=1)
    per_class = (acc / len(cohort)).tolist()
    return BrierReport(
        per_class=per_class,
        num_images=len(cohort),
        num_voxels_per_image=n_voxel,
        class_names=class_names,
    )
