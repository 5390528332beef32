import numpy as np
import pytest

from pathflow.aggregate.slide_fusion import PatchPredictions, majority_vote, median_risk
from pathflow.core.exceptions import AggregationError


def vote_oracle(probs):
    positives = sum(1 for p in probs if p >= 0.5)
    negatives = len(probs) - positives
    if positives == negatives:
        return int(np.mean(probs) >= 0.5)
    return int(positives > negatives)


class TestMajorityVote:
    def test_sixty_of_hundred(self):
        probs = np.r_[np.full(60, 0.8), np.full(40, 0.1)]
        assert majority_vote(PatchPredictions("S", probs)) == (1, 0.6)

    def test_tie_uses_mean(self):
        probs = np.r_[np.full(50, 0.6), np.full(50, 0.44)]
        assert majority_vote(PatchPredictions("S", probs)) == (1, 0.5)
        probs = np.r_[np.full(50, 0.55), np.full(50, 0.4)]
        assert majority_vote(PatchPredictions("S", probs)) == (0, 0.5)

    def test_all_below(self):
        assert majority_vote(PatchPredictions("S", np.full(100, 0.49))) == (0, 0.0)

    def test_random_against_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(1000):
            n = int(rng.integers(1, 41))
            probs = np.round(rng.random(n), 1)  # coarse values produce exact ties
            label, fraction = majority_vote(PatchPredictions("S", probs))
            assert label == vote_oracle(list(probs))
            assert fraction == pytest.approx(np.mean(probs >= 0.5))

    def test_permutation_invariance(self):
        rng = np.random.default_rng(8)
        for _ in range(1000):
            probs = rng.random(int(rng.integers(1, 41)))
            expected = majority_vote(PatchPredictions("S", probs))
            shuffled = majority_vote(PatchPredictions("S", rng.permutation(probs)))
            assert shuffled[0] == expected[0]
            assert shuffled[1] == pytest.approx(expected[1])

    def test_needs_probabilities(self):
        with pytest.raises(AggregationError):
            majority_vote(PatchPredictions("S", [0.3], kind="risk"))


class TestMedianRisk:
    def test_even_count(self):
        assert median_risk(PatchPredictions("S", np.arange(1.0, 101.0), kind="risk")) == 50.5

    def test_constant(self):
        assert median_risk(PatchPredictions("S", np.full(7, -1.25), kind="risk")) == -1.25

    def test_random_against_sorted_middle(self):
        rng = np.random.default_rng(6)
        for _ in range(1000):
            values = rng.standard_normal(int(rng.integers(1, 30)))
            ordered = sorted(values)
            mid = len(ordered) // 2
            expected = ordered[mid] if len(ordered) % 2 else (ordered[mid - 1] + ordered[mid]) / 2
            assert median_risk(PatchPredictions("S", values, kind="risk")) == pytest.approx(expected)

    def test_monotone_in_patch_risks(self):
        rng = np.random.default_rng(9)
        for _ in range(1000):
            values = rng.standard_normal(int(rng.integers(1, 30)))
            raised = values + np.abs(rng.standard_normal(len(values)))
            assert median_risk(PatchPredictions("S", raised, kind="risk")) >= \
                median_risk(PatchPredictions("S", values, kind="risk"))

    def test_translation_equivariance(self):
        rng = np.random.default_rng(10)
        for _ in range(1000):
            values = rng.standard_normal(int(rng.integers(1, 30)))
            shift = float(rng.uniform(-5, 5))
            base = median_risk(PatchPredictions("S", values, kind="risk"))
            moved = median_risk(PatchPredictions("S", values + shift, kind="risk"))
            assert moved == pytest.approx(base + shift, abs=1e-9)


class TestValidation:
    def test_empty(self):
        with pytest.raises(AggregationError) as info:
            PatchPredictions("S-3", [])
        assert info.value.details["slide_id"] == "S-3"

    @pytest.mark.parametrize("values,kind", [([np.nan], "risk"), ([1.2], "prob"), ([0.1], "odds")])
    def test_bad_values(self, values, kind):
        with pytest.raises(AggregationError):
            PatchPredictions("S", values, kind=kind)
