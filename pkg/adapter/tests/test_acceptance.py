"""Adapter acceptance: everything it writes must be consumable by the core."""

import json

import numpy as np
from raterlens import (
    ProbMap,
    aggregate,
    load_manifest,
    read_array,
    sample_transforms,
    save_manifest,
    transforms_to_json,
    write_array,
)
from raterlens.cli import main as core_main

from sampler_adapter import (
    ModelHandle,
    align_stack,
    convert_dataset,
    run_ensemble,
    run_ttd,
    run_tta,
)

from conftest import FIXTURE_MODEL, make_source_dir


def test_criterion_adapter_round_trip(tmp_path):
    source = make_source_dir(tmp_path, num_images=4)
    cohort = tmp_path / "cohort"
    manifest = convert_dataset(source, cohort)

    ttd_handle = ModelHandle(
        path=FIXTURE_MODEL, config={"dropout": 0.25}, supports_dropout=True
    )
    det_handle = ModelHandle(path=FIXTURE_MODEL)
    members = [
        ModelHandle(path=FIXTURE_MODEL, config={"sharpness": s})
        for s in (6.0, 9.0, 12.0)
    ]

    for i, rec in enumerate(manifest.images):
        d = cohort / rec.id
        image = np.load(d / "image.npy")

        run_ttd(ttd_handle, image, d / "ttd.npy", n=6, seed=100 + i)
        transforms = sample_transforms(6, seed=500 + i)
        transforms_to_json(transforms, d / "transforms.json")
        raw = run_tta(det_handle, image, d / "transforms.json", d / "tta_raw.npy",
                      seed=500 + i)
        align_stack(raw, d / "tta.npy")
        run_ensemble(members, image, d / "ensemble.npy")
        pred = det_handle.load()(image, np.random.default_rng(0))
        write_array(ProbMap(pred), d / "pred.npy")

        rec.sample_stack_paths = {
            "ttd": d / "ttd.npy", "tta": d / "tta.npy", "ensemble": d / "ensemble.npy"
        }
        rec.prediction_path = d / "pred.npy"

    save_manifest(manifest, cohort / "manifest.json")

    # every adapter-written stack satisfies core invariants on load
    reloaded = load_manifest(cohort / "manifest.json")
    assert reloaded.sources_present() == ["tta", "ttd", "ensemble"]
    for rec in reloaded.images:
        assert rec.load_stack("ttd").num_samples == 6
        assert rec.load_stack("ensemble").num_samples == 3
        tta = rec.load_stack("tta")
        assert tta.num_samples == 6
        assert not tta.all_valid  # inversion marked out-of-view pixels
        rec.load_prediction()

    # degenerate dropout: probability 0 and a hard argmax head
    frozen = ModelHandle(
        path=FIXTURE_MODEL, config={"dropout": 0.0, "hard": True},
        supports_dropout=True,
    )
    image = np.load(cohort / "img_0" / "image.npy")
    out = run_ttd(frozen, image, tmp_path / "frozen.npy", n=6, seed=0)
    res = aggregate(read_array(out, "stack"), "ttd")
    assert np.all(res.uncertainty.values == 0.0)

    # the core pipeline runs end to end on the adapter-produced cohort
    analysis = tmp_path / "analysis"
    rc = core_main(["analyze", "--manifest", str(cohort / "manifest.json"),
                    "--out", str(analysis), "--threads", "2"])
    assert rc == 0
    report = json.loads((analysis / "report.json").read_text())
    for key in ("brier", "dice", "auc_pr", "correlations", "variance_partition"):
        assert key in report
    for source in ("ttd", "tta", "ensemble"):
        assert source in report["correlations"]

    print("ACCEPTANCE adapter_round_trip: PASS")
