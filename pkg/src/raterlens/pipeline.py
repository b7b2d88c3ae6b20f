"""End-to-end cohort analysis.

One run loads a cohort manifest and computes, in order: fused ground
truths, rater and prediction entropy maps, Monte-Carlo aggregation per
sample source, class-wise Brier scores, uncertainty-quality AUC-PR,
per-image correlation of each uncertainty flavor with GT entropy, Dice
scores, and the variance partitioning of GT entropy onto the epistemic and
aleatoric observables.  Results land in ``report.json`` (stable key order,
byte-reproducible), per-table CSV files, and two SVG scatter plots.

Per-image work may run on a thread pool; every reduction consumes results
in manifest order, so the thread count never changes any output byte.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .arrays import ProbMap, ScalarMap, argmax_labels
from .evalmetrics import dice, misclassification_map, uncertainty_pr_curve
from .fusion import average_gt, majority_vote
from .manifest import CohortManifest, ImageRecord, ManifestError, SAMPLE_SOURCES
from .stats import pearson, scatter_csv, variance_partition
from .svgplot import scatter_svg
from .uncertainty import aggregate
from .variability import brier_score, entropy_map, prediction_entropy

__all__ = ["AnalysisConfig", "analyze_cohort"]

# Which stack sources count as which uncertainty flavor.
EPISTEMIC_SOURCES = ("ttd", "ensemble")
ALEATORIC_SOURCE = "tta"


@dataclass(frozen=True)
class AnalysisConfig:
    normalized_entropy: bool = False
    region: str = "all"  # "all" | "foreground"
    num_thresholds: int = 100
    granularity: str = "per_image"  # "per_image" | "per_voxel"
    fusion_method: str = "majority"  # "majority" | "manifest"
    require: tuple[str, ...] = ()
    threads: int = 1

    def __post_init__(self):
        if self.region not in ("all", "foreground"):
            raise ManifestError(f"unknown region mode {self.region!r}")
        if self.granularity not in ("per_image", "per_voxel"):
            raise ManifestError(f"unknown granularity {self.granularity!r}")
        if self.fusion_method not in ("majority", "manifest"):
            raise ManifestError(f"unknown fusion method {self.fusion_method!r}")
        if self.num_thresholds < 2:
            raise ManifestError("num_thresholds must be >= 2")
        for src in self.require:
            if src not in SAMPLE_SOURCES:
                raise ManifestError(f"unknown required source {src!r}")


@dataclass(eq=False)
class _ImageResult:
    id: str
    gt_entropy: ScalarMap
    prediction_entropy: ScalarMap
    uncertainty: dict[str, ScalarMap]
    misclassified: ScalarMap
    dice_row: list[float]
    avg_gt: ProbMap
    prediction: ProbMap
    foreground: np.ndarray  # (H, W) bool, fused GT != background


def _check_requirements(manifest: CohortManifest, config: AnalysisConfig) -> None:
    for src in config.require:
        missing = [im.id for im in manifest.images if src not in im.sample_stack_paths]
        if missing:
            raise ManifestError(
                f"manifest lacks required {src!r} sample stacks for images: "
                + ", ".join(missing)
            )
    if config.fusion_method == "manifest":
        missing = [im.id for im in manifest.images if im.fused_gt_path is None]
        if missing:
            raise ManifestError(
                "fusion method 'manifest' needs fused_gt_path for images: " + ", ".join(missing)
            )


def _analyze_image(
    record: ImageRecord, manifest: CohortManifest, config: AnalysisConfig, sources: list[str]
) -> _ImageResult:
    raters = record.load_rater_masks(manifest.num_classes)
    avg = average_gt(raters)
    gt_ent = entropy_map(avg, config.normalized_entropy)

    if config.fusion_method == "manifest":
        fused = record.load_fused_gt(manifest.num_classes)
    else:
        fused = majority_vote(raters)

    uncertainty: dict[str, ScalarMap] = {}
    agg_means: dict[str, ProbMap] = {}
    for src in sources:
        result = aggregate(record.load_stack(src), src)
        uncertainty[src] = (
            entropy_map(result.mean_prediction, True)
            if config.normalized_entropy
            else result.uncertainty
        )
        agg_means[src] = result.mean_prediction

    if record.prediction_path is not None:
        prediction = record.load_prediction()
    elif agg_means:
        prediction = agg_means[sources[0]]
    else:
        raise ManifestError(
            f"image {record.id!r} has neither a prediction map nor any sample stack"
        )
    pred_ent = prediction_entropy(prediction, config.normalized_entropy)

    pred_labels = argmax_labels(prediction)
    mis = misclassification_map(pred_labels, fused)
    dice_row = [dice(pred_labels, fused, c) for c in range(manifest.num_classes)]
    return _ImageResult(
        id=record.id,
        gt_entropy=gt_ent,
        prediction_entropy=pred_ent,
        uncertainty=uncertainty,
        misclassified=mis,
        dice_row=dice_row,
        avg_gt=avg,
        prediction=prediction,
        foreground=fused.labels != 0,
    )


def _region_mean(m: ScalarMap, fg: np.ndarray, region: str) -> float:
    if region == "foreground":
        if not fg.any():
            raise ManifestError("foreground region is empty; cannot reduce")
        return float(m.values[fg].mean(dtype=np.float64))
    return float(m.values.mean(dtype=np.float64))


def _observations(
    results: list[_ImageResult], pick, config: AnalysisConfig
) -> np.ndarray:
    """Per-image means or pooled voxels of the map selected by ``pick``."""
    if config.granularity == "per_image":
        return np.array(
            [_region_mean(pick(res), res.foreground, config.region) for res in results]
        )
    chunks = []
    for res in results:
        vals = pick(res).values.astype(np.float64)
        chunks.append(vals[res.foreground] if config.region == "foreground" else vals.ravel())
    return np.concatenate(chunks)


def analyze_cohort(
    manifest: CohortManifest, out_dir: Path | str, config: AnalysisConfig | None = None
) -> dict:
    """Run the full analysis; writes report.json plus CSVs and SVG plots.

    Returns the report dictionary (exactly what report.json contains).
    """
    config = config or AnalysisConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _check_requirements(manifest, config)
    sources = manifest.sources_present()

    def work(record: ImageRecord) -> _ImageResult:
        return _analyze_image(record, manifest, config, sources)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(work, manifest.images))
    else:
        results = [work(im) for im in manifest.images]

    report: dict = {
        "num_images": manifest.num_images,
        "num_classes": manifest.num_classes,
        "num_raters": manifest.num_raters,
        "class_names": manifest.class_names,
        "sources": sources,
        "config": {
            "normalized_entropy": config.normalized_entropy,
            "region": config.region,
            "num_thresholds": config.num_thresholds,
            "granularity": config.granularity,
            "fusion_method": config.fusion_method,
        },
    }

    # Variability preservation (class-wise Brier), all-voxel and foreground.
    pairs = [(res.avg_gt, res.prediction) for res in results]
    brier = brier_score(pairs, class_names=manifest.class_names)
    brier.to_csv(out_dir / "brier.csv")
    report["brier"] = {
        "per_class": brier.per_class,
        "num_images": brier.num_images,
        "num_voxels_per_image": brier.num_voxels_per_image,
    }
    try:
        brier_fg = brier_score(pairs, class_names=manifest.class_names, foreground_only=True)
        brier_fg.to_csv(out_dir / "brier_foreground.csv")
        report["brier_foreground"] = {"per_class": brier_fg.per_class}
    except Exception:
        report["brier_foreground"] = None

    # Uncertainty quality (AUC-PR), pooled over the whole cohort per source.
    mis_maps = [res.misclassified for res in results]
    pooled_rate = float(
        np.concatenate([m.values.ravel() for m in mis_maps]).mean(dtype=np.float64)
    )
    report["misclassification_rate"] = pooled_rate
    auc_pr: dict = {}
    for src in sources:
        curve = uncertainty_pr_curve(
            [res.uncertainty[src] for res in results], mis_maps, config.num_thresholds
        )
        curve.to_csv(out_dir / f"pr_{src}.csv")
        auc_pr[src] = {"auc": curve.auc, "num_thresholds": config.num_thresholds}
    report["auc_pr"] = auc_pr

    # Correlations with GT entropy, at the configured granularity.
    gt_obs = _observations(results, lambda r: r.gt_entropy, config)
    correlations: dict = {}
    series: dict[str, np.ndarray] = {
        "prediction_entropy": _observations(results, lambda r: r.prediction_entropy, config)
    }
    for src in sources:
        series[src] = _observations(results, lambda r, s=src: r.uncertainty[s], config)
    for name, obs in series.items():
        try:
            correlations[name] = pearson(gt_obs, obs, config.granularity).to_dict()
        except Exception as exc:
            correlations[name] = {"error": str(exc)}
    report["correlations"] = correlations

    # Variance partitioning: GT entropy onto (epistemic, aleatoric).
    partitions: dict = {}
    if ALEATORIC_SOURCE in series:
        for src in EPISTEMIC_SOURCES:
            if src not in series:
                continue
            try:
                part = variance_partition(gt_obs, series[src], series[ALEATORIC_SOURCE])
                partitions[src] = part.to_dict()
            except Exception as exc:
                partitions[src] = {"error": str(exc)}
    report["variance_partition"] = partitions

    # Dice of the argmax prediction against the fused GT.
    table = np.array([res.dice_row for res in results])
    report["dice"] = {
        "per_class_mean": table.mean(axis=0).tolist(),
        "per_class_mean_percent": (100.0 * table.mean(axis=0)).tolist(),
        "per_class_std": table.std(axis=0).tolist(),
        "per_image": {res.id: res.dice_row for res in results},
    }
    with open(out_dir / "dice.csv", "w", encoding="utf-8") as f:
        f.write("class_index,class_name,mean,mean_percent,std\n")
        for c in range(manifest.num_classes):
            col = table[:, c]
            f.write(
                f"{c},{manifest.class_names[c]},{col.mean()!r},"
                f"{100.0 * col.mean()!r},{col.std()!r}\n"
            )

    # Scatter plots (per-image means regardless of correlation granularity).
    img_cfg = AnalysisConfig(
        normalized_entropy=config.normalized_entropy,
        region=config.region,
        num_thresholds=config.num_thresholds,
        granularity="per_image",
        fusion_method=config.fusion_method,
    )
    gt_img = _observations(results, lambda r: r.gt_entropy, img_cfg)
    pred_img = _observations(results, lambda r: r.prediction_entropy, img_cfg)
    plots = [("prediction_entropy", pred_img, "prediction entropy")]
    for src in EPISTEMIC_SOURCES:
        if src in sources:
            epi_img = _observations(results, lambda r, s=src: r.uncertainty[s], img_cfg)
            plots.append((f"epistemic_{src}", epi_img, f"epistemic uncertainty ({src})"))
            break
    for stem, ys, label in plots:
        try:
            corr = pearson(gt_img, ys, "per_image")
            r_val, p_val = corr.r, corr.p_value
        except Exception:
            corr, r_val, p_val = None, None, None
        scatter_svg(
            gt_img,
            ys,
            out_dir / f"plot_{stem}_vs_gt.svg",
            title=f"{label} vs GT entropy",
            x_label="GT entropy (per-image mean)",
            y_label=label,
            r=r_val,
            p_value=p_val,
        )
        if corr is not None:
            scatter_csv(gt_img, ys, corr, out_dir / f"plot_{stem}_vs_gt.csv")

    report["per_image"] = [
        {
            "id": res.id,
            "gt_entropy_mean": _region_mean(res.gt_entropy, res.foreground, config.region),
            "prediction_entropy_mean": _region_mean(
                res.prediction_entropy, res.foreground, config.region
            ),
            "uncertainty_mean": {
                src: _region_mean(res.uncertainty[src], res.foreground, config.region)
                for src in sources
            },
            "misclassification_rate": float(res.misclassified.values.mean()),
            "dice": res.dice_row,
        }
        for res in results
    ]

    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    (out_dir / "report.json").write_text(text, encoding="utf-8")
    return report
