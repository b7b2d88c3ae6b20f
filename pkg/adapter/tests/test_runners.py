import numpy as np
import pytest
from raterlens import (
    ProbMap,
    TransformLimits,
    aggregate,
    invert_prediction,
    read_array,
    sample_transforms,
    transforms_to_json,
)

from sampler_adapter import (
    DEFAULT_SAMPLES,
    ModelError,
    ModelHandle,
    align_stack,
    run_ensemble,
    run_ttd,
    run_tta,
    transforms_sidecar_path,
)

from conftest import FIXTURE_MODEL, toy_image


def ttd_handle(**config):
    config.setdefault("dropout", 0.3)
    return ModelHandle(path=FIXTURE_MODEL, config=config, supports_dropout=True)


def det_handle(**config):
    return ModelHandle(path=FIXTURE_MODEL, config=config)


# ---------------------------------------------------------------- ttd


def test_ttd_writes_loadable_stack(tmp_path):
    out = run_ttd(ttd_handle(), toy_image(), tmp_path / "ttd.npy", n=5, seed=3)
    stack = read_array(out, "stack")
    assert stack.num_samples == 5
    assert stack.all_valid


def test_ttd_default_sample_count(tmp_path):
    out = run_ttd(ttd_handle(), toy_image(), tmp_path / "ttd.npy", seed=3)
    assert read_array(out, "stack").num_samples == DEFAULT_SAMPLES == 10


def test_ttd_deterministic_per_seed(tmp_path):
    a = run_ttd(ttd_handle(), toy_image(), tmp_path / "a.npy", n=4, seed=9)
    b = run_ttd(ttd_handle(), toy_image(), tmp_path / "b.npy", n=4, seed=9)
    c = run_ttd(ttd_handle(), toy_image(), tmp_path / "c.npy", n=4, seed=10)
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_ttd_prefix_stable_when_n_grows(tmp_path):
    short = run_ttd(ttd_handle(), toy_image(), tmp_path / "s.npy", n=3, seed=5)
    long = run_ttd(ttd_handle(), toy_image(), tmp_path / "l.npy", n=6, seed=5)
    a = read_array(short, "stack").samples
    b = read_array(long, "stack").samples
    np.testing.assert_array_equal(a, b[:3])


def test_ttd_zero_dropout_hard_model_gives_zero_uncertainty(tmp_path):
    handle = ttd_handle(dropout=0.0, hard=True)
    out = run_ttd(handle, toy_image(), tmp_path / "ttd.npy", n=6, seed=1)
    stack = read_array(out, "stack")
    for k in range(1, stack.num_samples):
        np.testing.assert_array_equal(stack.samples[k], stack.samples[0])
    res = aggregate(stack, "ttd")
    assert np.all(res.uncertainty.values == 0.0)


def test_ttd_requires_dropout_capability(tmp_path):
    with pytest.raises(ModelError, match="does not support dropout"):
        run_ttd(det_handle(), toy_image(), tmp_path / "x.npy", seed=0)


def test_ttd_rejects_non_simplex_output(tmp_path):
    handle = ModelHandle(path=FIXTURE_MODEL, entry="broken_model", supports_dropout=True)
    with pytest.raises(ModelError, match="sample 0.*non-simplex"):
        run_ttd(handle, toy_image(), tmp_path / "x.npy", seed=0)


def test_ttd_needs_a_sample(tmp_path):
    with pytest.raises(ModelError, match="at least one sample"):
        run_ttd(ttd_handle(), toy_image(), tmp_path / "x.npy", n=0, seed=0)


# ---------------------------------------------------------------- tta


def write_transforms(tmp_path, n=4, seed=9, limits=None):
    ts = sample_transforms(n, limits, seed=seed)
    path = tmp_path / "transforms.json"
    transforms_to_json(ts, path)
    return ts, path


def test_tta_writes_raw_stack_and_sidecar(tmp_path):
    _, tpath = write_transforms(tmp_path)
    out = run_tta(det_handle(), toy_image(), tpath, tmp_path / "raw.npy", seed=9)
    stack = read_array(out, "stack")
    assert stack.num_samples == 4
    assert stack.all_valid  # raw predictions live on the transformed grids
    sidecar = transforms_sidecar_path(out)
    assert sidecar.read_text() == tpath.read_text()


def test_tta_seed_fingerprint_mismatch(tmp_path):
    _, tpath = write_transforms(tmp_path, seed=9)
    with pytest.raises(ModelError, match="not generated with seed 8"):
        run_tta(det_handle(), toy_image(), tpath, tmp_path / "raw.npy", seed=8)


def test_tta_identity_transforms_match_plain_forward_passes(tmp_path):
    limits = TransformLimits(0.0, 0.0, 0.0, 0.0)
    _, tpath = write_transforms(tmp_path, n=3, seed=2, limits=limits)
    image = toy_image()
    out = run_tta(det_handle(), image, tpath, tmp_path / "raw.npy", seed=2)
    stack = read_array(out, "stack")
    direct = det_handle().load()(image, np.random.default_rng(0))
    for k in range(3):
        np.testing.assert_array_equal(stack.samples[k], direct)


def test_tta_identity_hard_model_zero_uncertainty_after_align(tmp_path):
    limits = TransformLimits(0.0, 0.0, 0.0, 0.0)
    _, tpath = write_transforms(tmp_path, n=3, seed=2, limits=limits)
    raw = run_tta(det_handle(hard=True), toy_image(), tpath, tmp_path / "raw.npy", seed=2)
    aligned = align_stack(raw, tmp_path / "tta.npy")
    res = aggregate(read_array(aligned, "stack"), "tta")
    assert np.all(res.uncertainty.values == 0.0)


def test_align_matches_core_inversion(tmp_path):
    ts, tpath = write_transforms(tmp_path, n=4, seed=11)
    raw = run_tta(det_handle(), toy_image(), tpath, tmp_path / "raw.npy", seed=11)
    aligned = read_array(align_stack(raw, tmp_path / "tta.npy"), "stack")
    assert not aligned.all_valid  # rotations push pixels out of view
    raw_stack = read_array(raw, "stack")
    for k, t in enumerate(ts):
        inv, ok = invert_prediction(ProbMap(raw_stack.samples[k]), t)
        np.testing.assert_array_equal(aligned.samples[k], inv.probs)
        np.testing.assert_array_equal(aligned.valid[k], ok)


# ---------------------------------------------------------------- ensemble


def test_ensemble_stack_and_order_metadata(tmp_path):
    handles = [det_handle(sharpness=s) for s in (6.0, 10.0, 14.0)]
    out = run_ensemble(handles, toy_image(), tmp_path / "ens.npy")
    stack = read_array(out, "stack")
    assert stack.num_samples == 3
    meta = out.with_name("ens.models.json")
    assert '"order"' in meta.read_text()
    rerun = run_ensemble(handles, toy_image(), tmp_path / "ens2.npy")
    assert out.read_bytes() == rerun.read_bytes()


def test_ensemble_of_identical_deterministic_models(tmp_path):
    handles = [det_handle(hard=True)] * 10
    out = run_ensemble(handles, toy_image(), tmp_path / "ens.npy")
    res = aggregate(read_array(out, "stack"), "ensemble")
    assert np.all(res.uncertainty.values == 0.0)


def test_ensemble_shape_disagreement(tmp_path):
    handles = [det_handle(num_classes=3), det_handle(num_classes=4)]
    with pytest.raises(ModelError, match="inter-model shape disagreement"):
        run_ensemble(handles, toy_image(), tmp_path / "ens.npy")


def test_ensemble_needs_models(tmp_path):
    with pytest.raises(ModelError, match="at least one model"):
        run_ensemble([], toy_image(), tmp_path / "ens.npy")
