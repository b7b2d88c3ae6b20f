"""Command-line front end.

Subcommands map one-to-one onto library operations, so every CLI result is
byte-identical to the corresponding library call:

* ``simulate`` -- generate a synthetic cohort directory + manifest
* ``analyze``  -- full cohort analysis: report.json, CSV tables, SVG plots
* ``fuse``     -- majority-vote or average-GT fusion of rater masks
* ``entropy``  -- entropy map of rater masks or of a probability map
* ``dice``     -- per-class Dice between two label maps
* ``aucpr``    -- uncertainty-vs-misclassification precision-recall sweep
* ``schedule`` -- per-(epoch, image) rater sampling table as CSV

Exit codes: 0 success, 1 runtime failure, 2 usage error.  Randomized
commands require an explicit --seed; there is no silent fallback to an
entropy source.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .arrays import InvariantError, read_array, write_array
from .evalmetrics import dice_report, uncertainty_pr_curve
from .fusion import average_gt, majority_vote, random_schedule, schedule_to_csv
from .manifest import ManifestError, SAMPLE_SOURCES, load_manifest
from .pipeline import AnalysisConfig, analyze_cohort
from .simulator import (
    CohortSpec,
    build_cohort,
    cohort_spec_from_json,
    default_rater_styles,
)
from .variability import entropy_map, gt_entropy

__all__ = ["main", "build_parser"]


def _default_threads() -> int:
    raw = os.environ.get("RATERLENS_THREADS", "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _nonnegative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="raterlens",
        description="Inter-rater variability and uncertainty analysis for 2D segmentation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic cohort")
    p.add_argument("--subjects", type=_positive_int, default=24)
    p.add_argument("--raters", type=_positive_int, default=3)
    p.add_argument("--seed", type=_nonnegative_int, required=True)
    p.add_argument("--out", type=Path, required=True, help="cohort output directory")
    p.add_argument("--samples", type=_positive_int, default=10, help="Monte-Carlo samples per stack")
    p.add_argument("--spec", type=Path, default=None, help="cohort spec JSON overriding defaults")
    p.add_argument("--no-linkage", action="store_true", help="decouple rater jitter from epistemic noise")
    p.add_argument("--threads", type=_positive_int, default=_default_threads())

    p = sub.add_parser("analyze", help="run the full analysis on a cohort")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="report output directory")
    p.add_argument("--normalized-entropy", action="store_true")
    p.add_argument("--region", choices=["all", "foreground"], default="all")
    p.add_argument("--thresholds", type=_positive_int, default=100)
    p.add_argument("--granularity", choices=["per_image", "per_voxel"], default="per_image")
    p.add_argument("--fusion", choices=["majority", "manifest"], default="majority")
    p.add_argument(
        "--require",
        action="append",
        choices=list(SAMPLE_SOURCES),
        default=None,
        help="fail unless these sample stacks exist for every image",
    )
    p.add_argument("--threads", type=_positive_int, default=_default_threads())

    p = sub.add_parser("fuse", help="fuse rater masks")
    p.add_argument("--method", choices=["majority", "average"], required=True)
    p.add_argument("--raters", type=Path, nargs="+", required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--classes", type=_positive_int, default=None)

    p = sub.add_parser("entropy", help="entropy map of rater masks or a probability map")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--raters", type=Path, nargs="+", help="rater label map files")
    src.add_argument("--probs", type=Path, help="probability map file")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--normalized", action="store_true")
    p.add_argument("--classes", type=_positive_int, default=None)

    p = sub.add_parser("dice", help="per-class Dice between prediction and GT label maps")
    p.add_argument("--pred", type=Path, required=True)
    p.add_argument("--gt", type=Path, required=True)
    p.add_argument("--classes", type=_positive_int, default=None)
    p.add_argument("--out", type=Path, default=None, help="optional CSV output")

    p = sub.add_parser("aucpr", help="uncertainty quality PR sweep")
    p.add_argument("--uncertainty", type=Path, nargs="+", required=True)
    p.add_argument("--misclassified", type=Path, nargs="+", required=True)
    p.add_argument("--thresholds", type=_positive_int, default=100)
    p.add_argument("--exact", action="store_true", help="use every distinct uncertainty value")
    p.add_argument("--out", type=Path, default=None, help="optional curve CSV output")

    p = sub.add_parser("schedule", help="rater sampling schedule CSV")
    p.add_argument("--images", type=_positive_int, required=True)
    p.add_argument("--raters", type=_positive_int, required=True)
    p.add_argument("--epochs", type=_positive_int, required=True)
    p.add_argument("--seed", type=_nonnegative_int, required=True)
    p.add_argument("--out", type=Path, default=None, help="CSV path (default: stdout)")

    return parser


def _load_labels(paths: list[Path], num_classes: int | None):
    maps = [read_array(p, "label", num_classes) for p in paths]
    if num_classes is None:
        c = max(m.num_classes for m in maps)
        maps = [read_array(p, "label", c) for p in paths]
    return maps


def _cmd_simulate(args) -> int:
    if args.spec is not None:
        spec = cohort_spec_from_json(args.spec)
    else:
        spec = CohortSpec(rater_styles=tuple(default_rater_styles(args.raters)))
    styles = list(spec.rater_styles) or default_rater_styles(args.raters)
    manifest = build_cohort(
        num_subjects=args.subjects,
        rater_styles=styles,
        surrogate=spec.surrogate,
        seed=args.seed,
        out_dir=args.out,
        phantom=spec.phantom,
        linkage=spec.linkage and not args.no_linkage,
        noise_coupling=spec.noise_coupling,
        link_weight=spec.link_weight,
        num_samples=args.samples if args.spec is None else spec.num_samples,
        atypicality_range=spec.atypicality_range,
        texture_sigma_range=spec.texture_sigma_range,
        transform_limits=spec.transform_limits,
        threads=args.threads,
    )
    print(manifest.root / "manifest.json")
    return 0


def _cmd_analyze(args) -> int:
    manifest = load_manifest(args.manifest)
    config = AnalysisConfig(
        normalized_entropy=args.normalized_entropy,
        region=args.region,
        num_thresholds=args.thresholds,
        granularity=args.granularity,
        fusion_method=args.fusion,
        require=tuple(args.require or ()),
        threads=args.threads,
    )
    analyze_cohort(manifest, args.out, config)
    print(Path(args.out) / "report.json")
    return 0


def _cmd_fuse(args) -> int:
    maps = _load_labels(args.raters, args.classes)
    if args.method == "majority":
        write_array(majority_vote(maps), args.out)
    else:
        write_array(average_gt(maps), args.out)
    print(args.out)
    return 0


def _cmd_entropy(args) -> int:
    if args.raters:
        maps = _load_labels(args.raters, args.classes)
        result = gt_entropy(maps, args.normalized)
    else:
        result = entropy_map(read_array(args.probs, "prob"), args.normalized)
    write_array(result, args.out)
    print(args.out)
    return 0


def _cmd_dice(args) -> int:
    num_classes = args.classes
    pred = read_array(args.pred, "label", num_classes)
    gt = read_array(args.gt, "label", num_classes)
    if num_classes is None:
        c = max(pred.num_classes, gt.num_classes)
        pred = read_array(args.pred, "label", c)
        gt = read_array(args.gt, "label", c)
    report = dice_report([pred], [gt])
    for c in range(report.per_image_per_class.shape[1]):
        v = float(report.per_class_mean[c])
        print(f"class {c}: dice {v:.6f} ({100.0 * v:.2f}%)")
    if args.out is not None:
        report.to_csv(args.out)
    return 0


def _cmd_aucpr(args) -> int:
    if len(args.uncertainty) != len(args.misclassified):
        raise InvariantError(
            f"{len(args.uncertainty)} uncertainty maps but "
            f"{len(args.misclassified)} misclassification maps"
        )
    unc = [read_array(p, "scalar") for p in args.uncertainty]
    mis = [read_array(p, "scalar") for p in args.misclassified]
    curve = uncertainty_pr_curve(unc, mis, args.thresholds, exact=args.exact)
    print(f"auc_pr {curve.auc:.6f}")
    if args.out is not None:
        curve.to_csv(args.out)
    return 0


def _cmd_schedule(args) -> int:
    table = random_schedule(args.images, args.raters, args.epochs, args.seed)
    text = schedule_to_csv(table, args.out)
    if args.out is None:
        sys.stdout.write(text)
    else:
        print(args.out)
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "analyze": _cmd_analyze,
    "fuse": _cmd_fuse,
    "entropy": _cmd_entropy,
    "dice": _cmd_dice,
    "aucpr": _cmd_aucpr,
    "schedule": _cmd_schedule,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (InvariantError, ManifestError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
