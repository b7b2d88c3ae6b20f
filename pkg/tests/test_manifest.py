import json

import numpy as np
import pytest

from raterlens import (
    CohortManifest,
    ImageRecord,
    LabelMap,
    ManifestError,
    SampleStack,
    load_manifest,
    save_manifest,
    write_array,
)

from conftest import random_probs


def _toy_cohort(root, num_images=2, num_raters=3, with_stack=True):
    """Write a small consistent cohort on disk and return its records."""
    rng = np.random.default_rng(5)
    records = []
    for i in range(num_images):
        img_dir = root / f"img_{i}"
        img_dir.mkdir(parents=True)
        rater_paths = []
        for r in range(num_raters):
            m = LabelMap(rng.integers(0, 4, (12, 14), dtype=np.uint8), num_classes=4)
            p = img_dir / f"rater_{r}.npy"
            write_array(m, p)
            rater_paths.append(p)
        fused = img_dir / "fused.npy"
        write_array(LabelMap(rng.integers(0, 4, (12, 14), dtype=np.uint8), 4), fused)
        stacks = {}
        if with_stack:
            stack = SampleStack(np.stack([random_probs(rng).probs for _ in range(3)]))
            sp = img_dir / "stack_ttd.npy"
            write_array(stack, sp)
            stacks["ttd"] = sp
        records.append(
            ImageRecord(
                id=f"img_{i}",
                rater_mask_paths=rater_paths,
                fused_gt_path=fused,
                sample_stack_paths=stacks,
            )
        )
    return CohortManifest(
        num_classes=4,
        class_names=["background", "a", "b", "c"],
        images=records,
        root=root,
    )


def test_round_trip(tmp_path):
    manifest = _toy_cohort(tmp_path)
    mpath = save_manifest(manifest, tmp_path / "manifest.json")
    back = load_manifest(mpath)
    assert back.num_images == 2
    assert back.num_raters == 3
    assert back.num_classes == 4
    assert back.sources_present() == ["ttd"]
    assert [im.id for im in back.images] == ["img_0", "img_1"]
    # loader must resolve everything to existing absolute paths
    for im in back.images:
        for p in im.rater_mask_paths:
            assert p.is_absolute() and p.exists()


def test_saved_paths_are_relative(tmp_path):
    manifest = _toy_cohort(tmp_path)
    mpath = save_manifest(manifest, tmp_path / "manifest.json")
    doc = json.loads(mpath.read_text())
    assert doc["images"][0]["rater_mask_paths"][0] == "img_0/rater_0.npy"


def test_rater_count_mismatch(tmp_path):
    manifest = _toy_cohort(tmp_path)
    mpath = save_manifest(manifest, tmp_path / "manifest.json")
    doc = json.loads(mpath.read_text())
    doc["images"][1]["rater_mask_paths"] = doc["images"][1]["rater_mask_paths"][:2]
    mpath.write_text(json.dumps(doc))
    with pytest.raises(ManifestError, match="rater count mismatch"):
        load_manifest(mpath)


def test_missing_referenced_file_names_path(tmp_path):
    manifest = _toy_cohort(tmp_path)
    mpath = save_manifest(manifest, tmp_path / "manifest.json")
    (tmp_path / "img_0" / "stack_ttd.npy").unlink()
    with pytest.raises(ManifestError, match="stack_ttd.npy"):
        load_manifest(mpath)


def test_not_json(tmp_path):
    p = tmp_path / "manifest.json"
    p.write_text("{nope")
    with pytest.raises(ManifestError, match="not valid JSON"):
        load_manifest(p)


def test_missing_manifest_file(tmp_path):
    with pytest.raises(ManifestError, match="not found"):
        load_manifest(tmp_path / "absent.json")


def test_missing_required_key(tmp_path):
    p = tmp_path / "manifest.json"
    p.write_text(json.dumps({"num_classes": 4, "images": []}))
    with pytest.raises(ManifestError, match="class_names"):
        load_manifest(p)


def test_class_names_length_checked(tmp_path):
    p = tmp_path / "manifest.json"
    p.write_text(json.dumps({"num_classes": 4, "class_names": ["a", "b"], "images": []}))
    with pytest.raises(ManifestError, match="class_names has 2"):
        load_manifest(p)


def test_duplicate_image_id(tmp_path):
    manifest = _toy_cohort(tmp_path)
    mpath = save_manifest(manifest, tmp_path / "manifest.json")
    doc = json.loads(mpath.read_text())
    doc["images"][1]["id"] = doc["images"][0]["id"]
    mpath.write_text(json.dumps(doc))
    with pytest.raises(ManifestError, match="duplicate image id"):
        load_manifest(mpath)


def test_shape_disagreement_between_raters(tmp_path):
    manifest = _toy_cohort(tmp_path)
    mpath = save_manifest(manifest, tmp_path / "manifest.json")
    odd = LabelMap(np.zeros((9, 9), dtype=np.uint8), num_classes=4)
    write_array(odd, tmp_path / "img_0" / "rater_2.npy")
    with pytest.raises(ManifestError, match="shape"):
        load_manifest(mpath)


def test_stack_class_count_checked(tmp_path):
    manifest = _toy_cohort(tmp_path)
    mpath = save_manifest(manifest, tmp_path / "manifest.json")
    rng = np.random.default_rng(9)
    wrong = SampleStack(np.stack([random_probs(rng, num_classes=3).probs for _ in range(2)]))
    write_array(wrong, tmp_path / "img_0" / "stack_ttd.npy")
    with pytest.raises(ManifestError, match="class"):
        load_manifest(mpath)


def test_wrong_dtype_rejected_at_header_level(tmp_path):
    manifest = _toy_cohort(tmp_path)
    mpath = save_manifest(manifest, tmp_path / "manifest.json")
    np.save(tmp_path / "img_0" / "rater_0.npy", np.zeros((12, 14), dtype=np.float32))
    with pytest.raises(ManifestError, match="dtype"):
        load_manifest(mpath)


def test_record_level_loaders(tmp_path):
    manifest = _toy_cohort(tmp_path)
    mpath = save_manifest(manifest, tmp_path / "manifest.json")
    back = load_manifest(mpath)
    im = back.images[0]
    masks = im.load_rater_masks(back.num_classes)
    assert len(masks) == 3 and masks[0].num_classes == 4
    assert im.load_stack("ttd").num_samples == 3
    assert im.load_fused_gt(back.num_classes).shape == (12, 14)
    with pytest.raises(ManifestError, match="no 'tta' sample stack"):
        im.load_stack("tta")
    with pytest.raises(ManifestError, match="no prediction"):
        im.load_prediction()
