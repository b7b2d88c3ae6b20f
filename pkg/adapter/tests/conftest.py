from pathlib import Path

import numpy as np

FIXTURE_MODEL = Path(__file__).parent / "fixture_model.py"


def toy_image(seed: int = 0, shape: tuple = (24, 24)) -> np.ndarray:
    """Smooth nonnegative intensity field in [0, 1] with a little noise."""
    h, w = shape
    yy, xx = np.mgrid[0:h, 0:w].astype(float)
    rng = np.random.default_rng(seed)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    img = 0.5 + 0.35 * np.sin(xx / w * 4.0 + phase) * np.cos(yy / h * 3.0)
    img = img + rng.normal(0.0, 0.02, shape)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def toy_mask(image: np.ndarray, jitter_seed: int, num_classes: int = 3) -> np.ndarray:
    """Threshold the intensity into bands; jitter makes raters disagree."""
    rng = np.random.default_rng(jitter_seed)
    edges = np.linspace(0.0, 1.0, num_classes + 1)[1:-1]
    edges = edges + rng.normal(0.0, 0.04, num_classes - 1)
    return np.digitize(image, np.sort(edges)).astype(np.uint8)


def make_source_dir(root: Path, num_images: int = 3, raters=("a", "b", "c")) -> Path:
    """Build a convert_dataset-style directory of masks plus images."""
    source = root / "source"
    for i in range(num_images):
        d = source / f"img_{i}"
        d.mkdir(parents=True)
        image = toy_image(seed=7 + i)
        np.save(d / "image.npy", image)
        for r, name in enumerate(raters):
            np.save(d / f"rater_{name}.npy", toy_mask(image, jitter_seed=100 * i + r))
    return source
