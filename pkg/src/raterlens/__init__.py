"""Inter-rater variability and uncertainty analysis for 2D segmentation.

The package measures how much human raters disagree on multi-class
segmentation masks (pixel-wise entropy of the averaged one-hot
annotations), how much of that disagreement a model's probabilistic output
preserves (class-wise Brier score, entropy correlation), and how the
model's epistemic and aleatoric uncertainty - estimated from Monte-Carlo
sample stacks produced by test-time dropout, test-time augmentation, or
deep ensembles - relate to it (Pearson correlation, variance
partitioning, misclassification-detection AUC-PR).

A built-in simulator generates synthetic cohorts with controllable rater
styles and separable uncertainty sources so the whole pipeline runs and is
testable without any trained model or private data.
"""

from .arrays import (
    InvariantError,
    LabelMap,
    ProbMap,
    SampleStack,
    ScalarMap,
    argmax_labels,
    one_hot,
    read_array,
    write_array,
)
from .evalmetrics import (
    DiceReport,
    PRCurve,
    dice,
    dice_report,
    misclassification_map,
    uncertainty_pr_curve,
)
from .fusion import (
    RaterSchedule,
    average_gt,
    majority_vote,
    random_schedule,
    schedule_from_csv,
    schedule_to_csv,
)
from .manifest import CohortManifest, ImageRecord, ManifestError, load_manifest, save_manifest
from .pipeline import AnalysisConfig, analyze_cohort
from .simulator import (
    CohortSpec,
    PhantomSpec,
    RaterStyle,
    SurrogateSpec,
    build_cohort,
    calibrated_prediction,
    default_rater_styles,
    generate_phantom,
    overconfident_prediction,
    simulate_rater,
    simulate_samples,
)
from .stats import (
    CorrelationResult,
    VariancePartition,
    paired_test,
    pearson,
    reduce_per_image,
    variance_partition,
)
from .uncertainty import (
    TransformLimits,
    TransformParams,
    UncertaintyResult,
    aggregate,
    align_tta_samples,
    apply_transform,
    invert_prediction,
    sample_transforms,
    transforms_from_json,
    transforms_to_json,
)
from .variability import BrierReport, brier_score, entropy_map, gt_entropy, prediction_entropy

__version__ = "0.1.0"

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
    "CohortManifest",
    "ImageRecord",
    "ManifestError",
    "load_manifest",
    "save_manifest",
    "RaterSchedule",
    "majority_vote",
    "average_gt",
    "random_schedule",
    "schedule_to_csv",
    "schedule_from_csv",
    "BrierReport",
    "brier_score",
    "entropy_map",
    "gt_entropy",
    "prediction_entropy",
    "TransformLimits",
    "TransformParams",
    "UncertaintyResult",
    "aggregate",
    "align_tta_samples",
    "apply_transform",
    "invert_prediction",
    "sample_transforms",
    "transforms_to_json",
    "transforms_from_json",
    "DiceReport",
    "PRCurve",
    "dice",
    "dice_report",
    "misclassification_map",
    "uncertainty_pr_curve",
    "CorrelationResult",
    "VariancePartition",
    "pearson",
    "reduce_per_image",
    "variance_partition",
    "paired_test",
    "PhantomSpec",
    "RaterStyle",
    "SurrogateSpec",
    "CohortSpec",
    "generate_phantom",
    "simulate_rater",
    "simulate_samples",
    "build_cohort",
    "default_rater_styles",
    "calibrated_prediction",
    "overconfident_prediction",
    "AnalysisConfig",
    "analyze_cohort",
]
