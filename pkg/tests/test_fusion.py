import numpy as np
import pytest

from raterlens import (
    InvariantError,
    LabelMap,
    argmax_labels,
    average_gt,
    majority_vote,
    one_hot,
    random_schedule,
    schedule_from_csv,
    schedule_to_csv,
)
from raterlens.fusion import SCHEDULE_RNG_VERSION, rater_counts

from conftest import random_labels
from oracles import average_ref, majority_ref


def _maps(arrays, num_classes):
    return [LabelMap(np.asarray(a, dtype=np.uint8), num_classes) for a in arrays]


class TestMajorityVote:
    def test_strict_majority(self):
        raters = _maps([[[1]], [[1]], [[2]]], 3)
        assert majority_vote(raters).labels[0, 0] == 1

    def test_three_way_tie_lowest_index(self):
        raters = _maps([[[1]], [[2]], [[3]]], 4)
        assert majority_vote(raters).labels[0, 0] == 1

    def test_single_rater_identity(self):
        rng = np.random.default_rng(0)
        m = random_labels(rng)
        assert np.array_equal(majority_vote([m]).labels, m.labels)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(1)
        raters = [random_labels(rng) for _ in range(5)]
        a = majority_vote(raters).labels
        b = majority_vote(raters[::-1]).labels
        assert np.array_equal(a, b)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(30):
            raters = [random_labels(rng, 5, (6, 7)) for _ in range(3)]
            got = majority_vote(raters).labels
            want = majority_ref([r.labels for r in raters], 5)
            assert np.array_equal(got, want)

    def test_shape_mismatch_rejected(self):
        a = LabelMap(np.zeros((2, 2), np.uint8), 3)
        b = LabelMap(np.zeros((3, 3), np.uint8), 3)
        with pytest.raises(InvariantError):
            majority_vote([a, b])


class TestAverageGT:
    def test_two_one_split(self):
        raters = _maps([[[1]], [[1]], [[2]]], 3)
        avg = average_gt(raters)
        np.testing.assert_allclose(
            avg.probs[:, 0, 0], [0.0, 2 / 3, 1 / 3], atol=1e-7
        )

    def test_unanimous_is_one_hot(self):
        rng = np.random.default_rng(3)
        m = random_labels(rng)
        avg = average_gt([m, m, m])
        assert np.array_equal(avg.probs, one_hot(m).probs)

    def test_values_are_multiples_of_one_over_r(self):
        rng = np.random.default_rng(4)
        for r_count in (2, 3, 5):
            raters = [random_labels(rng) for _ in range(r_count)]
            scaled = average_gt(raters).probs.astype(np.float64) * r_count
            assert np.allclose(scaled, np.round(scaled), atol=1e-5)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            raters = [random_labels(rng, 4, (5, 6)) for _ in range(4)]
            got = average_gt(raters).probs
            want = average_ref([r.labels for r in raters], 4)
            np.testing.assert_allclose(got, want, atol=1e-6)

    def test_argmax_of_average_equals_majority(self):
        rng = np.random.default_rng(6)
        for _ in range(40):
            raters = [random_labels(rng, 5, (8, 8)) for _ in range(3)]
            assert np.array_equal(
                argmax_labels(average_gt(raters)).labels,
                majority_vote(raters).labels,
            )

    def test_odd_raters_two_classes_no_ties(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            raters = [random_labels(rng, 2, (8, 8)) for _ in range(5)]
            counts = rater_counts(raters)
            assert not np.any(counts[0] == counts[1])


class TestSchedule:
    def test_single_rater_all_zero(self):
        s = random_schedule(num_images=4, num_raters=1, num_epochs=3, seed=0)
        assert np.all(s.assignments == 0)

    def test_same_seed_identical(self):
        a = random_schedule(10, 3, 5, seed=42)
        b = random_schedule(10, 3, 5, seed=42)
        assert np.array_equal(a.assignments, b.assignments)

    def test_different_seed_differs(self):
        a = random_schedule(10, 3, 5, seed=42)
        b = random_schedule(10, 3, 5, seed=43)
        assert not np.array_equal(a.assignments, b.assignments)

    def test_frequencies_within_three_sigma(self):
        # 10000 draws, R=3: binomial bound on each rater's frequency
        s = random_schedule(num_images=100, num_raters=3, num_epochs=100, seed=11)
        n = s.assignments.size
        assert n == 10000
        sigma = np.sqrt((1 / 3) * (2 / 3) / n)
        for r in range(3):
            freq = float((s.assignments == r).mean())
            assert abs(freq - 1 / 3) <= 3 * sigma

    def test_rng_is_versioned(self):
        assert SCHEDULE_RNG_VERSION == 1

    def test_csv_round_trip(self, tmp_path):
        s = random_schedule(7, 3, 4, seed=9)
        path = tmp_path / "schedule.csv"
        schedule_to_csv(s, path)
        back = schedule_from_csv(path)
        assert np.array_equal(back.assignments, s.assignments)
        assert back.seed == 9

    def test_csv_layout(self):
        s = random_schedule(2, 2, 2, seed=5)
        text = schedule_to_csv(s)
        lines = text.strip().splitlines()
        assert lines[0] == "# seed=5"
        assert lines[1] == "epoch,image_id,rater_index"
        assert len(lines) == 2 + 4  # epochs * images data rows
        assert lines[2].startswith("0,")

    def test_training_scale_row_count(self):
        # 76 images x 250 epochs -> 19000 assignment rows
        s = random_schedule(num_images=76, num_raters=3, num_epochs=250, seed=1)
        text = schedule_to_csv(s)
        data_rows = [ln for ln in text.strip().splitlines() if not ln.startswith(("#", "epoch"))]
        assert len(data_rows) == 19000

    def test_bad_counts_rejected(self):
        with pytest.raises(InvariantError):
            random_schedule(0, 3, 5, seed=0)
        with pytest.raises(InvariantError):
            random_schedule(5, 0, 5, seed=0)
