"""Converting external per-rater mask directories into core cohorts.

Expected source layout, one directory per image:

    source/
      <image_id>/
        rater_<name>.npy    # (H, W) integer label array, one per rater
        image.npy           # optional intensity image, copied verbatim

Every image must carry the same set of rater names.  Masks are rewritten
through the core's array writer; the resulting manifest is re-read through
the core loader before being returned, so anything this module emits has
already passed core validation.
"""

from __future__ import annotations

import shutil
from pathlib import Path

import numpy as np
from raterlens import CohortManifest, ImageRecord, LabelMap, load_manifest, save_manifest, write_array


class DatasetError(ValueError):
    """Source directory empty, inconsistent, or malformed."""


def _rater_files(image_dir: Path) -> dict[str, Path]:
    return {p.stem: p for p in sorted(image_dir.glob("rater_*.npy"))}


def convert_dataset(
    source_dir: Path | str,
    out_dir: Path | str,
    class_names: list[str] | None = None,
) -> CohortManifest:
    """Rewrite a mask directory as a core cohort and return its manifest.

    ``class_names`` fixes the class count; otherwise it is inferred as the
    largest label present plus one (at least two).  Re-running over the
    same source produces byte-identical output.
    """
    source_dir = Path(source_dir)
    out_dir = Path(out_dir)
    if not source_dir.is_dir():
        raise DatasetError(f"source directory not found: {source_dir}")
    image_dirs = sorted(d for d in source_dir.iterdir() if d.is_dir())
    if not image_dirs:
        raise DatasetError(f"no image directories under {source_dir}")

    # first pass: check rater consistency and find the class count
    reference: dict[str, Path] | None = None
    reference_id = ""
    masks: dict[str, dict[str, np.ndarray]] = {}
    max_label = 1
    for d in image_dirs:
        raters = _rater_files(d)
        if not raters:
            raise DatasetError(f"image {d.name!r} has no rater_*.npy masks")
        if reference is None:
            reference, reference_id = raters, d.name
        elif sorted(raters) != sorted(reference):
            raise DatasetError(
                f"inconsistent rater sets: image {d.name!r} has {sorted(raters)} "
                f"but {reference_id!r} has {sorted(reference)}"
            )
        masks[d.name] = {}
        for name, path in raters.items():
            arr = np.load(path)
            if arr.ndim != 2:
                raise DatasetError(f"mask {path} is not 2D: shape {arr.shape}")
            masks[d.name][name] = arr
            max_label = max(max_label, int(arr.max()))

    if class_names is None:
        num_classes = max_label + 1
        class_names = ["background"] + [f"region_{i}" for i in range(1, num_classes)]
    else:
        num_classes = len(class_names)

    records = []
    for d in image_dirs:
        rec_dir = out_dir / d.name
        paths = []
        for name in sorted(masks[d.name]):
            target = rec_dir / f"{name}.npy"
            target.parent.mkdir(parents=True, exist_ok=True)
            write_array(LabelMap(masks[d.name][name].astype(np.uint8), num_classes), target)
            paths.append(target)
        image_file = d / "image.npy"
        if image_file.is_file():
            shutil.copyfile(image_file, rec_dir / "image.npy")
        records.append(ImageRecord(id=d.name, rater_mask_paths=paths))

    manifest = CohortManifest(
        num_classes=num_classes,
        class_names=list(class_names),
        images=records,
        root=out_dir.resolve(),
    )
    path = save_manifest(manifest, out_dir / "manifest.json")
    return load_manifest(path)
