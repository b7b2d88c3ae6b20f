"""Segmentation accuracy and uncertainty-quality metrics.

Dice measures overlap with a reference labeling.  The quality of an
uncertainty map is scored by how well high uncertainty predicts
misclassification: voxels are pooled across the test set, "positive" means
uncertainty >= threshold, and the area under the resulting precision-recall
curve summarizes the sweep.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .arrays import InvariantError, LabelMap, ScalarMap

__all__ = [
    "dice",
    "dice_report",
    "DiceReport",
    "misclassification_map",
    "uncertainty_pr_curve",
    "PRCurve",
]


def dice(pred: LabelMap, gt: LabelMap, class_index: int) -> float:
    """Dice overlap 2|P * G| / (|P| + |G|) for one class; 1.0 when both empty."""
    if pred.shape != gt.shape:
        raise InvariantError(f"shape mismatch: prediction {pred.shape} vs GT {gt.shape}")
    limit = max(pred.num_classes, gt.num_classes)
    if not 0 <= class_index < limit:
        raise InvariantError(f"class index {class_index} out of range for {limit} classes")
    p = pred.labels == class_index
    g = gt.labels == class_index
    denom = int(p.sum()) + int(g.sum())
    if denom == 0:
        return 1.0
    return 2.0 * int((p & g).sum()) / denom


@dataclass(eq=False)
class DiceReport:
    """Per-image, per-class Dice table with class-wise mean and std."""

    per_image_per_class: np.ndarray  # (num_images, num_classes) float64
    class_names: list[str] | None = None

    def __post_init__(self):
        table = np.asarray(self.per_image_per_class, dtype=np.float64)
        if table.ndim != 2 or table.size == 0:
            raise InvariantError("Dice table must be a nonempty 2D array")
        if table.min() < 0.0 or table.max() > 1.0:
            raise InvariantError("Dice values must lie in [0, 1]")
        table.flags.writeable = False
        self.per_image_per_class = table

    @property
    def per_class_mean(self) -> np.ndarray:
        return self.per_image_per_class.mean(axis=0)

    @property
    def per_class_std(self) -> np.ndarray:
        return self.per_image_per_class.std(axis=0)

    def name_for(self, c: int) -> str:
        if self.class_names is not None and c < len(self.class_names):
            return self.class_names[c]
        return f"class_{c}"

    def to_json(self, path: Path | str | None = None) -> str:
        doc = {
            "per_class": [
                {
                    "class_index": c,
                    "class_name": self.name_for(c),
                    "mean": float(self.per_class_mean[c]),
                    "mean_percent": float(100.0 * self.per_class_mean[c]),
                    "std": float(self.per_class_std[c]),
                }
                for c in range(self.per_image_per_class.shape[1])
            ],
            "per_image": self.per_image_per_class.tolist(),
        }
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def to_csv(self, path: Path | str | None = None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["class_index", "class_name", "mean", "mean_percent", "std"])
        for c in range(self.per_image_per_class.shape[1]):
            writer.writerow(
                [
                    c,
                    self.name_for(c),
                    repr(float(self.per_class_mean[c])),
                    repr(float(100.0 * self.per_class_mean[c])),
                    repr(float(self.per_class_std[c])),
                ]
            )
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def dice_report(
    preds: list[LabelMap], gts: list[LabelMap], class_names: list[str] | None = None
) -> DiceReport:
    """Dice for every image and every class of the cohort."""
    if not preds or len(preds) != len(gts):
        raise InvariantError("need equal-length nonempty prediction and GT lists")
    c = preds[0].num_classes
    table = np.empty((len(preds), c), dtype=np.float64)
    for i, (p, g) in enumerate(zip(preds, gts)):
        for k in range(c):
            table[i, k] = dice(p, g, k)
    return DiceReport(table, class_names)


def misclassification_map(pred: LabelMap, gt: LabelMap) -> ScalarMap:
    """Indicator map: 1.0 where prediction and GT disagree, else 0.0."""
    if pred.shape != gt.shape:
        raise InvariantError(f"shape mismatch: prediction {pred.shape} vs GT {gt.shape}")
    return ScalarMap((pred.labels != gt.labels).astype(np.float32))


@dataclass(eq=False)
class PRCurve:
    """Precision-recall sweep of an uncertainty threshold.

    Point 0 is the zero-positive anchor at threshold infinity (precision 1.0
    by convention, recall 0), which pins the curve's start; the remaining
    points correspond to the requested thresholds in descending order, so
    recall is nondecreasing along the arrays.
    """

    thresholds: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    auc: float

    def __post_init__(self):
        p, r = np.asarray(self.precision), np.asarray(self.recall)
        if not (len(self.thresholds) == len(p) == len(r)):
            raise InvariantError("thresholds, precision, recall must have equal lengths")
        if p.min() < 0 or p.max() > 1 or r.min() < 0 or r.max() > 1:
            raise InvariantError("precision and recall must lie in [0, 1]")
        if not (0.0 <= self.auc <= 1.0 + 1e-12):
            raise InvariantError(f"auc outside [0, 1]: {self.auc}")

    def to_json(self, path: Path | str | None = None) -> str:
        # JSON has no literal for infinity, so the anchor threshold is null.
        thr = [None if math.isinf(t) else float(t) for t in self.thresholds]
        doc = {
            "auc": float(self.auc),
            "thresholds": thr,
            "precision": [float(v) for v in self.precision],
            "recall": [float(v) for v in self.recall],
        }
        text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def to_csv(self, path: Path | str | None = None) -> str:
        buf = io.StringIO()
        buf.write(f"# auc={float(self.auc)!r}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["threshold", "precision", "recall"])
        for t, p, r in zip(self.thresholds, self.precision, self.recall):
            writer.writerow(["inf" if math.isinf(t) else repr(float(t)), repr(float(p)), repr(float(r))])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text


def uncertainty_pr_curve(
    uncertainty: list[ScalarMap],
    misclassified: list[ScalarMap],
    num_thresholds: int = 100,
    exact: bool = False,
) -> PRCurve:
    """Precision-recall curve of "is this voxel misclassified" vs uncertainty.

    Voxels are pooled across all images before thresholding.  A voxel is
    positive (flagged uncertain) iff its uncertainty >= threshold; true
    positives are uncertain misclassified voxels.  Thresholds are
    ``num_thresholds`` evenly spaced values in [0, max observed uncertainty],
    or every distinct uncertainty value with ``exact`` (which makes the AUC a
    pure rank statistic).  The area is the trapezoid rule over recall.
    """
    if not uncertainty or len(uncertainty) != len(misclassified):
        raise InvariantError("need equal-length nonempty uncertainty and misclassification lists")
    for i, (u, m) in enumerate(zip(uncertainty, misclassified)):
        if u.shape != m.shape:
            raise InvariantError(
                f"image {i}: uncertainty shape {u.shape} != misclassification {m.shape}"
            )
    u_all = np.concatenate([u.values.astype(np.float64).ravel() for u in uncertainty])
    m_all = np.concatenate([m.values.ravel() > 0.5 for m in misclassified])
    total_mis = int(m_all.sum())
    if total_mis == 0:
        raise InvariantError("no misclassified voxels pooled; recall is undefined")

    order = np.argsort(u_all, kind="stable")
    u_sorted = u_all[order]
    mis_sorted = m_all[order].astype(np.int64)
    # suffix_mis[i] = misclassified voxels with sort position >= i
    suffix_mis = np.concatenate([np.cumsum(mis_sorted[::-1])[::-1], [0]])
    n = u_all.size

    if exact:
        finite = np.unique(u_sorted)[::-1]  # descending
    elif num_thresholds < 1:
        raise InvariantError("num_thresholds must be >= 1")
    else:
        finite = np.linspace(0.0, float(u_sorted[-1]), num_thresholds)[::-1]

    idx = np.searchsorted(u_sorted, finite, side="left")
    positives = n - idx
    tp = suffix_mis[idx]
    precision = np.where(positives > 0, tp / np.maximum(positives, 1), 1.0)
    recall = tp / total_mis

    thresholds = np.concatenate([[np.inf], finite])
    precision = np.concatenate([[1.0], precision])
    recall = np.concatenate([[0.0], recall])

    # Recall is nondecreasing as thresholds descend, so this order is sorted
    # by recall already; zero-width segments contribute nothing.
    auc = float(np.trapezoid(precision, recall))
    auc = min(max(auc, 0.0), 1.0)
    return PRCurve(thresholds=thresholds, precision=precision, recall=recall, auc=auc)
