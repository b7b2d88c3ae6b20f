"""Cohort manifest: a JSON index binding one analysis run's files together.

A manifest lists, per image, the rater label masks, optional fused ground
truth, optional Monte-Carlo sample stacks (keyed by their source: ``tta``,
``ttd``, or ``ensemble``) and an optional single prediction map.  All paths
are stored relative to the manifest's own directory so a cohort can be moved
as a unit.

Loading is total: any malformed manifest raises ``ManifestError`` with a
message naming the offending image or file, and never yields a partially
checked cohort.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .arrays import (
    InvariantError,
    LabelMap,
    ProbMap,
    SampleStack,
    peek_header,
    read_array,
    valid_mask_path,
)

__all__ = ["ManifestError", "ImageRecord", "CohortManifest", "load_manifest", "save_manifest"]

SAMPLE_SOURCES = ("tta", "ttd", "ensemble")


class ManifestError(ValueError):
    """Manifest file missing, malformed, or referencing inconsistent data."""


@dataclass(eq=False)
class ImageRecord:
    """One image's files. Paths are absolute after loading."""

    id: str
    rater_mask_paths: list[Path]
    fused_gt_path: Path | None = None
    sample_stack_paths: dict[str, Path] = field(default_factory=dict)
    prediction_path: Path | None = None

    @property
    def num_raters(self) -> int:
        return len(self.rater_mask_paths)

    def load_rater_masks(self, num_classes: int) -> list[LabelMap]:
        return [read_array(p, "label", num_classes) for p in self.rater_mask_paths]

    def load_stack(self, source: str) -> SampleStack:
        if source not in self.sample_stack_paths:
            raise ManifestError(f"image {self.id!r} has no {source!r} sample stack")
        return read_array(self.sample_stack_paths[source], "stack")

    def load_prediction(self) -> ProbMap:
        if self.prediction_path is None:
            raise ManifestError(f"image {self.id!r} has no prediction map")
        return read_array(self.prediction_path, "prob")

    def load_fused_gt(self, num_classes: int) -> LabelMap:
        if self.fused_gt_path is None:
            raise ManifestError(f"image {self.id!r} has no fused ground truth")
        return read_array(self.fused_gt_path, "label", num_classes)


@dataclass(eq=False)
class CohortManifest:
    """A validated cohort: class metadata plus per-image file records."""

    num_classes: int
    class_names: list[str]
    images: list[ImageRecord]
    root: Path

    @property
    def num_images(self) -> int:
        return len(self.images)

    @property
    def num_raters(self) -> int:
        return self.images[0].num_raters if self.images else 0

    def sources_present(self) -> list[str]:
        """Sample-stack sources available on every image of the cohort."""
        out = []
        for source in SAMPLE_SOURCES:
            if self.images and all(source in im.sample_stack_paths for im in self.images):
                out.append(source)
        return out


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ManifestError(msg)


def _as_rel(path: Path, root: Path) -> str:
    try:
        return path.resolve().relative_to(root).as_posix()
    except ValueError:
        # Files outside the manifest directory keep an absolute path.
        return str(path.resolve())


def save_manifest(manifest: CohortManifest, path: Path | str) -> Path:
    """Serialize a manifest as UTF-8 JSON with paths relative to its directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    root = path.parent.resolve()
    images = []
    for im in manifest.images:
        rec: dict = {
            "id": im.id,
            "rater_mask_paths": [_as_rel(p, root) for p in im.rater_mask_paths],
        }
        if im.fused_gt_path is not None:
            rec["fused_gt_path"] = _as_rel(im.fused_gt_path, root)
        if im.sample_stack_paths:
            rec["sample_stack_paths"] = {
                k: _as_rel(p, root) for k, p in sorted(im.sample_stack_paths.items())
            }
        if im.prediction_path is not None:
            rec["prediction_path"] = _as_rel(im.prediction_path, root)
        images.append(rec)
    doc = {
        "num_classes": manifest.num_classes,
        "class_names": manifest.class_names,
        "images": images,
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _check_file(path: Path, kind: str, image_id: str) -> tuple[int, ...]:
    """Existence + header check; returns the stored shape."""
    if not path.exists():
        raise ManifestError(f"image {image_id!r}: referenced file does not exist: {path}")
    try:
        shape, dtype = peek_header(path)
    except InvariantError as exc:
        raise ManifestError(str(exc)) from exc
    expected = {"label": ("|u1", 2), "prob": ("<f4", 3), "stack": ("<f4", 4)}[kind]
    _require(
        dtype == expected[0],
        f"image {image_id!r}: {path} has dtype {dtype}, expected {expected[0]}",
    )
    _require(
        len(shape) == expected[1],
        f"image {image_id!r}: {path} has {len(shape)} dimensions, expected {expected[1]}",
    )
    return shape


def load_manifest(path: Path | str) -> CohortManifest:
    """Load and fully validate a cohort manifest.

    Checks performed: JSON well-formedness, required keys, a uniform rater
    count across images, existence of every referenced file, and per-image
    agreement of spatial shapes across rater masks, stacks, fused GT, and
    prediction (header-level; array payloads are not loaded here).
    """
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest file not found: {path}")
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ManifestError(f"manifest is not valid JSON: {path}: {exc}") from exc
    _require(isinstance(doc, dict), "manifest root must be a JSON object")
    for key in ("num_classes", "class_names", "images"):
        _require(key in doc, f"manifest missing required key {key!r}")

    num_classes = doc["num_classes"]
    _require(
        isinstance(num_classes, int) and 2 <= num_classes <= 256,
        f"num_classes must be an integer in [2, 256], got {num_classes!r}",
    )
    class_names = doc["class_names"]
    _require(
        isinstance(class_names, list) and all(isinstance(n, str) for n in class_names),
        "class_names must be a list of strings",
    )
    _require(
        len(class_names) == num_classes,
        f"class_names has {len(class_names)} entries for num_classes={num_classes}",
    )
    _require(isinstance(doc["images"], list), "images must be a list")

    root = path.parent.resolve()
    images: list[ImageRecord] = []
    rater_count: int | None = None
    seen_ids: set[str] = set()
    for pos, rec in enumerate(doc["images"]):
        _require(isinstance(rec, dict), f"images[{pos}] must be an object")
        _require("id" in rec and isinstance(rec["id"], str), f"images[{pos}] missing string id")
        image_id = rec["id"]
        _require(image_id not in seen_ids, f"duplicate image id {image_id!r}")
        seen_ids.add(image_id)

        raw_raters = rec.get("rater_mask_paths")
        _require(
            isinstance(raw_raters, list) and len(raw_raters) >= 1,
            f"image {image_id!r}: rater_mask_paths must be a nonempty list",
        )
        if rater_count is None:
            rater_count = len(raw_raters)
        elif len(raw_raters) != rater_count:
            raise ManifestError(
                f"rater count mismatch: image {image_id!r} lists {len(raw_raters)} raters, "
                f"expected {rater_count}"
            )

        rater_paths = [root / p for p in raw_raters]
        shape: tuple[int, ...] | None = None
        for rp in rater_paths:
            s = _check_file(rp, "label", image_id)
            if shape is None:
                shape = s
            elif s != shape:
                raise ManifestError(
                    f"image {image_id!r}: rater mask {rp} has shape {s}, expected {shape}"
                )
        assert shape is not None
        h, w = shape

        fused = rec.get("fused_gt_path")
        fused_path = None
        if fused is not None:
            fused_path = root / fused
            s = _check_file(fused_path, "label", image_id)
            _require(
                s == (h, w),
                f"image {image_id!r}: fused GT shape {s} does not match rater masks {(h, w)}",
            )

        stacks: dict[str, Path] = {}
        raw_stacks = rec.get("sample_stack_paths", {})
        _require(
            isinstance(raw_stacks, dict),
            f"image {image_id!r}: sample_stack_paths must be an object",
        )
        for source, sp in raw_stacks.items():
            _require(
                source in SAMPLE_SOURCES,
                f"image {image_id!r}: unknown sample source {source!r} "
                f"(expected one of {', '.join(SAMPLE_SOURCES)})",
            )
            stack_path = root / sp
            s = _check_file(stack_path, "stack", image_id)
            _require(
                s[1] == num_classes,
                f"image {image_id!r}: stack {stack_path} has {s[1]} classes, "
                f"expected {num_classes}",
            )
            _require(
                s[2:] == (h, w),
                f"image {image_id!r}: stack {stack_path} spatial shape {s[2:]} "
                f"does not match rater masks {(h, w)}",
            )
            mp = valid_mask_path(stack_path)
            if mp.exists():
                ms, mdtype = peek_header(mp)
                _require(
                    mdtype == "|u1" and ms == (s[0], h, w),
                    f"image {image_id!r}: validity mask {mp} has shape {ms} dtype {mdtype}, "
                    f"expected {(s[0], h, w)} |u1",
                )
            stacks[source] = stack_path

        pred = rec.get("prediction_path")
        pred_path = None
        if pred is not None:
            pred_path = root / pred
            s = _check_file(pred_path, "prob", image_id)
            _require(
                s == (num_classes, h, w),
                f"image {image_id!r}: prediction shape {s}, expected {(num_classes, h, w)}",
            )

        images.append(
            ImageRecord(
                id=image_id,
                rater_mask_paths=rater_paths,
                fused_gt_path=fused_path,
                sample_stack_paths=stacks,
                prediction_path=pred_path,
            )
        )

    return CohortManifest(
        num_classes=num_classes, class_names=class_names, images=images, root=root
    )
