"""Label fusion across raters, and the rater-sampling schedule.

Two fusion strategies turn R rater masks into a single training/evaluation
target:

* ``majority_vote`` -- per-pixel plurality label, ties to the lowest index
* ``random_schedule`` -- pick one whole rater mask per (epoch, image); the
  schedule is precomputed here and handed to a training harness as CSV

``average_gt`` is the soft companion of majority vote: per-pixel rater
frequencies, which downstream entropy treats as the label distribution.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .arrays import InvariantError, LabelMap, ProbMap

__all__ = [
    "RaterSchedule",
    "majority_vote",
    "average_gt",
    "rater_counts",
    "random_schedule",
    "schedule_to_csv",
    "schedule_from_csv",
]


def _check_rater_set(raters: list[LabelMap]) -> tuple[int, int, int]:
    if not raters:
        raise InvariantError("need at least one rater mask")
    shape = raters[0].shape
    num_classes = raters[0].num_classes
    for i, r in enumerate(raters[1:], start=1):
        if r.shape != shape:
            raise InvariantError(f"rater {i} shape {r.shape} does not match rater 0 {shape}")
        if r.num_classes != num_classes:
            raise InvariantError(
                f"rater {i} has {r.num_classes} classes, rater 0 has {num_classes}"
            )
    return shape[0], shape[1], num_classes


def rater_counts(raters: list[LabelMap]) -> np.ndarray:
    """Per-pixel vote counts, shape (C, H, W), int64."""
    h, w, c = _check_rater_set(raters)
    counts = np.zeros((c, h, w), dtype=np.int64)
    for r in raters:
        np.add.at(counts, (r.labels, *np.indices((h, w))), 1)
    return counts


def majority_vote(raters: list[LabelMap]) -> LabelMap:
    """Per-pixel plurality label; ties go to the lowest class index."""
    counts = rater_counts(raters)
    # np.argmax returns the first maximal index, which is the tie-break we want.
    labels = np.argmax(counts, axis=0).astype(np.uint8)
    return LabelMap(labels, raters[0].num_classes)


def average_gt(raters: list[LabelMap]) -> ProbMap:
    """Per-pixel class frequencies over raters (every value a multiple of 1/R)."""
    counts = rater_counts(raters)
    probs = (counts / len(raters)).astype(np.float32)
    return ProbMap(probs)


@dataclass(eq=False)
class RaterSchedule:
    """Which rater's mask to use for each (epoch, image) during training.

    ``assignments[e, i]`` is the rater index for image ``i`` in epoch ``e``.
    """

    num_epochs: int
    num_images: int
    num_raters: int
    seed: int
    assignments: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.assignments)
        if a.shape != (self.num_epochs, self.num_images):
            raise InvariantError(
                f"assignment table shape {a.shape}, expected "
                f"{(self.num_epochs, self.num_images)}"
            )
        if a.size and (a.min() < 0 or a.max() >= self.num_raters):
            raise InvariantError("assignment outside [0, num_raters)")
        a = a.astype(np.int64, copy=True)
        a.flags.writeable = False
        self.assignments = a


# Schedule RNG, version 1: Philox4x64 keyed with the user seed, counter
# starting at 0.  Consecutive raw 64-bit outputs are mapped to [0, R) by
# rejection (values >= floor(2^64 / R) * R are discarded) so every rater is
# exactly equally likely, then consumed in epoch-major order.  Fixing the
# algorithm here, not just the seed, is what makes schedules reproducible
# across numpy versions and across languages.
SCHEDULE_RNG_VERSION = 1


def _philox_uniform_ints(seed: int, count: int, bound: int) -> np.ndarray:
    gen = np.random.Generator(np.random.Philox(key=seed))
    if bound == 1:
        return np.zeros(count, dtype=np.int64)
    limit = (2**64 // bound) * bound
    out = np.empty(count, dtype=np.int64)
    filled = 0
    while filled < count:
        # Draw a modest surplus; rejection discards < 50% even in the worst case.
        need = count - filled
        raw = gen.integers(0, 2**64, size=max(need + 16, int(need * 1.1)), dtype=np.uint64)
        kept = raw[raw < limit]
        take = min(need, kept.size)
        out[filled : filled + take] = (kept[:take] % bound).astype(np.int64)
        filled += take
    return out


def random_schedule(num_images: int, num_raters: int, num_epochs: int, seed: int) -> RaterSchedule:
    """Draw one uniform rater index per (epoch, image), deterministically."""
    if num_images < 1 or num_raters < 1 or num_epochs < 1:
        raise InvariantError("num_images, num_raters, num_epochs must all be >= 1")
    draws = _philox_uniform_ints(seed, num_epochs * num_images, num_raters)
    table = draws.reshape(num_epochs, num_images)
    return RaterSchedule(
        num_epochs=num_epochs,
        num_images=num_images,
        num_raters=num_raters,
        seed=seed,
        assignments=table,
    )


def schedule_to_csv(schedule: RaterSchedule, path: Path | str | None = None) -> str:
    """CSV text "epoch,image_id,rater_index", seed in a leading comment line."""
    buf = io.StringIO()
    buf.write(f"# seed={schedule.seed}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "image_id", "rater_index"])
    for e in range(schedule.num_epochs):
        for i in range(schedule.num_images):
            writer.writerow([e, i, int(schedule.assignments[e, i])])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def schedule_from_csv(path: Path | str) -> RaterSchedule:
    """Inverse of schedule_to_csv; rater count is inferred as max index + 1."""
    text = Path(path).read_text(encoding="utf-8")
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# seed="):
        raise InvariantError("schedule CSV must start with a '# seed=<n>' comment")
    seed = int(lines[0].split("=", 1)[1])
    reader = csv.reader(lines[1:])
    header = next(reader, None)
    if header != ["epoch", "image_id", "rater_index"]:
        raise InvariantError(f"unexpected schedule CSV header: {header}")
    rows = [(int(e), int(i), int(r)) for e, i, r in reader]
    if not rows:
        raise InvariantError("schedule CSV has no assignments")
    num_epochs = max(e for e, _, _ in rows) + 1
    num_images = max(i for _, i, _ in rows) + 1
    num_raters = max(r for _, _, r in rows) + 1
    table = np.full((num_epochs, num_images), -1, dtype=np.int64)
    for e, i, r in rows:
        table[e, i] = r
    if (table < 0).any():
        raise InvariantError("schedule CSV does not cover every (epoch, image) cell")
    return RaterSchedule(
        num_epochs=num_epochs,
        num_images=num_images,
        num_raters=num_raters,
        seed=seed,
        assignments=table,
    )
