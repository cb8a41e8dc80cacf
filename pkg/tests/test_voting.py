from __future__ import annotations

import itertools

import numpy as np
import pytest

from ntvsim.errors import DegenerateWeightsWarning
from ntvsim.voting import (
    VoterWeights,
    error_weights,
    majority_vote,
    majority_vote_batch,
    map_vote,
    weighted_vote,
    weighted_vote_batch,
)


class TestMajority:
    def test_simple_majority(self):
        assert majority_vote(np.array([1, 1, 0])) == 1
        assert majority_vote(np.array([0, 0, 1])) == 0

    def test_tie_goes_to_zero(self):
        assert majority_vote(np.array([1, 0, 1, 0])) == 0

    def test_single_vote(self):
        assert majority_vote(np.array([1])) == 1
        assert majority_vote(np.array([0])) == 0

    def test_non_bit_rejected(self):
        with pytest.raises(ValueError):
            majority_vote(np.array([0, 2]))


class TestWeighted:
    def test_equal_weights_reduce_to_majority_exhaustive(self):
        for size in (1, 3, 5, 7):
            w = VoterWeights(np.ones(size))
            for combo in itertools.product((0, 1), repeat=size):
                votes = np.array(combo)
                assert weighted_vote(votes, w) == majority_vote(votes)

    def test_mass_below_half_is_zero(self):
        # weight mass on class 1 exactly 0.4 -> 0
        votes = np.array([1, 0])
        assert weighted_vote(votes, VoterWeights(np.array([0.4, 0.6]))) == 0

    def test_exact_half_tie_is_zero(self):
        votes = np.array([1, 0])
        assert weighted_vote(votes, VoterWeights(np.array([0.5, 0.5]))) == 0

    def test_scale_invariance(self):
        rng = np.random.default_rng(80)
        for _ in range(200):
            size = int(rng.integers(1, 8))
            votes = rng.integers(0, 2, size=size)
            w = rng.uniform(0.01, 1.0, size=size)
            a = weighted_vote(votes, VoterWeights(w))
            b = weighted_vote(votes, VoterWeights(w * 37.5))
            assert a == b

    def test_degenerate_weights_fall_back_to_majority(self):
        votes = np.array([1, 1, 0])
        with pytest.warns(DegenerateWeightsWarning):
            assert weighted_vote(votes, VoterWeights(np.zeros(3))) == 1

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError):
            VoterWeights(np.array([0.5, -0.1]))

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(81)
        for _ in range(50):
            size = int(rng.integers(1, 9))
            n = 16
            votes = rng.integers(0, 2, size=(size, n))
            w = VoterWeights(rng.uniform(0.0, 1.0, size=size) + 0.01)
            batch = weighted_vote_batch(votes, w)
            ref = [weighted_vote(votes[:, i], w) for i in range(n)]
            assert batch.tolist() == ref
            assert majority_vote_batch(votes).tolist() == [
                majority_vote(votes[:, i]) for i in range(n)
            ]


class TestErrorWeights:
    def test_frozen_values(self):
        # acc 0.9 with flip rate 0.5 -> 0.5; with flip rate 1.0 -> 0.1
        w = error_weights(np.array([0.9, 0.9]), np.array([0.5, 1.0]))
        assert w.raw[0] == pytest.approx(0.5)
        assert w.raw[1] == pytest.approx(0.1)

    def test_zero_flip_rate_reduces_to_accuracy(self):
        acc = np.array([0.6, 0.75, 0.9])
        w = error_weights(acc, np.zeros(3))
        assert np.array_equal(w.raw, acc)

    def test_affine_in_flip_rate(self):
        # slope in p is (1 - 2 acc)
        acc = np.array([0.8])
        w0 = error_weights(acc, np.array([0.0])).raw[0]
        w1 = error_weights(acc, np.array([0.25])).raw[0]
        assert (w1 - w0) / 0.25 == pytest.approx(1 - 2 * 0.8)

    def test_range_validation(self):
        with pytest.raises(ValueError):
            error_weights(np.array([1.2]), np.array([0.0]))
        with pytest.raises(ValueError):
            error_weights(np.array([0.9]), np.array([-0.1]))


class TestMapVote:
    def test_unanimous(self):
        w = VoterWeights(np.array([0.2, 0.3, 0.5]))
        assert map_vote(np.array([1, 1, 1]), w, np.array([0, 1])) == 1

    def test_three_label_example(self):
        w = VoterWeights(np.array([0.5, 0.3, 0.4]))
        votes = np.array([2, 0, 2])
        assert map_vote(votes, w, np.array([0, 1, 2])) == 2

    def test_tie_takes_smallest_label(self):
        w = VoterWeights(np.array([0.5, 0.5]))
        assert map_vote(np.array([2, 1]), w, np.array([1, 2])) == 1

    def test_binary_agrees_with_weighted_vote(self):
        rng = np.random.default_rng(82)
        labels = np.array([0, 1])
        for size in (1, 2, 3, 4, 5):
            for _ in range(100):
                w = VoterWeights(rng.uniform(0.01, 1.0, size=size))
                for combo in itertools.product((0, 1), repeat=size):
                    votes = np.array(combo)
                    mass_one = w.normalized[votes == 1].sum()
                    if abs(mass_one - 0.5) < 1e-12:
                        continue  # exact tie: both rules return 0 anyway
                    assert map_vote(votes, w, labels) == weighted_vote(votes, w)

    def test_vote_outside_labels_rejected(self):
        w = VoterWeights(np.array([1.0]))
        with pytest.raises(ValueError):
            map_vote(np.array([3]), w, np.array([0, 1]))


def test_monotone_in_weight_of_agreeing_voter():
    # raising the weight of a class-1 voter can only move the outcome toward 1
    rng = np.random.default_rng(83)
    for _ in range(300):
        size = int(rng.integers(2, 8))
        votes = rng.integers(0, 2, size=size)
        if not votes.any():
            continue
        w = rng.uniform(0.05, 1.0, size=size)
        before = weighted_vote(votes, VoterWeights(w))
        k = int(rng.choice(np.flatnonzero(votes == 1)))
        w2 = w.copy()
        w2[k] += rng.uniform(0.1, 2.0)
        after = weighted_vote(votes, VoterWeights(w2))
        assert after >= before
