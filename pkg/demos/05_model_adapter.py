"""Plugging a real model into the pipeline with sampler-adapter.

The adapter package (adapter/ in this repository) runs test-time dropout,
test-time augmentation, and ensemble inference on any user model exposed
as "image in, class-probability map out", and writes stacks the core
loads unchanged.  Here the "model" is a ten-line intensity-band
classifier written to a temp file, standing in for a trained network.

Run:  python3 demos/05_model_adapter.py   (needs sampler-adapter installed;
      see adapter/README.md)
"""

import tempfile
from pathlib import Path

import numpy as np

from raterlens import (
    ProbMap,
    SurrogateSpec,
    aggregate,
    analyze_cohort,
    build_cohort,
    default_rater_styles,
    read_array,
    sample_transforms,
    save_manifest,
    transforms_to_json,
    write_array,
)

try:
    from sampler_adapter import ModelHandle, align_stack, run_ensemble, run_ttd, run_tta
except ImportError:
    raise SystemExit("sampler-adapter is not installed; run "
                     "`python3 -m pip install -e adapter/ --no-build-isolation` first")

MODEL_SOURCE = '''
import numpy as np

def build_model(num_classes=5, sharpness=40.0, dropout=0.0):
    anchors = np.linspace(0.0, 1.0, num_classes)
    def model(image, rng):
        logits = -sharpness * (image[None] - anchors[:, None, None]) ** 2
        if dropout:
            keep = rng.random(logits.shape) >= dropout
            logits = np.where(keep, logits, -6.0)
        z = np.exp(logits - logits.max(0))
        return (z / z.sum(0)).astype(np.float32)
    return model
'''

root = Path(tempfile.mkdtemp(prefix="raterlens_demo05_"))
model_file = root / "band_model.py"
model_file.write_text(MODEL_SOURCE)

# the simulator provides images and rater masks; the adapter replaces the
# surrogate's sample stacks with real (well, realistic) model inference
cohort = build_cohort(
    num_subjects=4,
    rater_styles=default_rater_styles(3),
    surrogate=SurrogateSpec(),
    seed=19,
    out_dir=root / "cohort",
    num_samples=4,
    threads=2,
)

ttd_handle = ModelHandle(model_file, config={"dropout": 0.15}, supports_dropout=True)
det_handle = ModelHandle(model_file)
members = [ModelHandle(model_file, config={"sharpness": s}) for s in (25.0, 40.0, 60.0)]

for i, rec in enumerate(cohort.images):
    sdir = root / "cohort" / "subjects" / rec.id
    image = read_array(sdir / "image.npy", "scalar").values

    run_ttd(ttd_handle, image, sdir / "model_ttd.npy", n=6, seed=100 + i)
    transforms_to_json(sample_transforms(6, seed=200 + i), sdir / "transforms.json")
    raw = run_tta(det_handle, image, sdir / "transforms.json",
                  sdir / "model_tta_raw.npy", seed=200 + i)
    align_stack(raw, sdir / "model_tta.npy")
    run_ensemble(members, image, sdir / "model_ensemble.npy")
    write_array(ProbMap(det_handle.load()(image, np.random.default_rng(0))),
                sdir / "model_pred.npy")

    rec.sample_stack_paths = {
        "ttd": sdir / "model_ttd.npy",
        "tta": sdir / "model_tta.npy",
        "ensemble": sdir / "model_ensemble.npy",
    }
    rec.prediction_path = sdir / "model_pred.npy"

save_manifest(cohort, root / "cohort" / "manifest.json")

stack = read_array(root / "cohort" / "subjects" / "s000" / "model_ttd.npy", "stack")
print(f"adapter-written TTD stack: {stack.num_samples} samples, "
      f"mean uncertainty {aggregate(stack, 'ttd').uncertainty.values.mean():.4f}")

report = analyze_cohort(cohort, root / "analysis")
print("\ncore analysis over the model-backed cohort:")
for src, entry in report["correlations"].items():
    if "r" in entry:
        print(f"  {src:<20} r={entry['r']:+.3f}  p={entry['p_value']:.3g}")
print(f"\nartifacts under {root}")
