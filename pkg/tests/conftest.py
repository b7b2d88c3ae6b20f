import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from raterlens import (
    LabelMap,
    ProbMap,
    SurrogateSpec,
    build_cohort,
    default_rater_styles,
)


def random_labels(rng, num_classes=4, shape=(12, 14)):
    return LabelMap(
        rng.integers(0, num_classes, size=shape, dtype=np.uint8).copy(),
        num_classes=num_classes,
    )


def random_probs(rng, num_classes=4, shape=(12, 14)):
    # Dirichlet-ish: exponential draws renormalized per pixel
    raw = rng.exponential(1.0, size=(num_classes, *shape))
    return ProbMap((raw / raw.sum(axis=0)).astype(np.float32))


@pytest.fixture(scope="session")
def mini_cohort(tmp_path_factory):
    """Small simulated cohort shared by pipeline and CLI read-only tests."""
    out = tmp_path_factory.mktemp("cohort")
    return build_cohort(
        num_subjects=6,
        rater_styles=default_rater_styles(3),
        surrogate=SurrogateSpec(),
        seed=101,
        out_dir=out,
        num_samples=5,
        threads=2,
    )
