import numpy as np
import pytest
from raterlens import InvariantError, load_manifest

from sampler_adapter import DatasetError, convert_dataset

from conftest import make_source_dir


def _tree_bytes(root):
    return {
        p.relative_to(root).as_posix(): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


def test_convert_round_trips_through_core(tmp_path):
    source = make_source_dir(tmp_path)
    manifest = convert_dataset(source, tmp_path / "cohort")
    assert manifest.num_images == 3
    assert manifest.num_raters == 3
    assert manifest.num_classes == 3
    # the manifest on disk loads independently
    again = load_manifest(tmp_path / "cohort" / "manifest.json")
    assert [im.id for im in again.images] == [im.id for im in manifest.images]
    masks = again.images[0].load_rater_masks(again.num_classes)
    assert masks[0].labels.shape == (24, 24)


def test_convert_copies_images_verbatim(tmp_path):
    source = make_source_dir(tmp_path)
    convert_dataset(source, tmp_path / "cohort")
    src = (source / "img_1" / "image.npy").read_bytes()
    dst = (tmp_path / "cohort" / "img_1" / "image.npy").read_bytes()
    assert src == dst


def test_convert_is_idempotent(tmp_path):
    source = make_source_dir(tmp_path)
    convert_dataset(source, tmp_path / "cohort")
    first = _tree_bytes(tmp_path / "cohort")
    convert_dataset(source, tmp_path / "cohort")
    assert _tree_bytes(tmp_path / "cohort") == first


def test_missing_rater_file_is_named(tmp_path):
    source = make_source_dir(tmp_path)
    (source / "img_1" / "rater_b.npy").unlink()
    with pytest.raises(DatasetError, match="inconsistent rater sets.*img_1"):
        convert_dataset(source, tmp_path / "cohort")


def test_image_without_masks(tmp_path):
    source = make_source_dir(tmp_path)
    extra = source / "img_9"
    extra.mkdir()
    with pytest.raises(DatasetError, match="img_9.*no rater_"):
        convert_dataset(source, tmp_path / "cohort")


def test_source_dir_missing(tmp_path):
    with pytest.raises(DatasetError, match="source directory not found"):
        convert_dataset(tmp_path / "nope", tmp_path / "cohort")


def test_explicit_class_names(tmp_path):
    source = make_source_dir(tmp_path)
    manifest = convert_dataset(
        source, tmp_path / "cohort", class_names=["bg", "low", "high", "spare"]
    )
    assert manifest.num_classes == 4
    assert manifest.class_names == ["bg", "low", "high", "spare"]


def test_class_names_too_small_for_labels(tmp_path):
    source = make_source_dir(tmp_path)
    with pytest.raises(InvariantError):
        convert_dataset(source, tmp_path / "cohort", class_names=["bg", "fg"])


def test_all_background_still_two_classes(tmp_path):
    source = tmp_path / "source"
    for i in range(2):
        d = source / f"img_{i}"
        d.mkdir(parents=True)
        np.save(d / "rater_a.npy", np.zeros((8, 8), np.uint8))
        np.save(d / "rater_b.npy", np.zeros((8, 8), np.uint8))
    manifest = convert_dataset(source, tmp_path / "cohort")
    assert manifest.num_classes == 2
