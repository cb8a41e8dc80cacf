"""Ensemble vote combiners: majority, reliability-weighted, and MAP.

Votes are class labels; for the binary combiners they are bits. The weighted
vote compares the weight mass on class 1 against half the total mass, which for
equal weights reduces to plain majority. The reliability used for weighting is
the probability a member is correct on deployed hardware: its clean accuracy
blended with its output-flip rate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ntvsim.errors import DegenerateWeightsWarning


@dataclass(frozen=True)
class VoterWeights:
    raw: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "raw", np.asarray(self.raw, dtype=np.float64))
        if self.raw.ndim != 1 or self.raw.size < 1:
            raise ValueError("weights must be a non-empty vector")
        if np.any(self.raw < 0.0) or not np.isfinite(self.raw).all():
            raise ValueError("weights must be finite and non-negative")

    @property
    def total(self) -> float:
        return float(self.raw.sum())

    @property
    def normalized(self) -> np.ndarray:
        if self.total == 0.0:
            raise ValueError("cannot normalize all-zero weights")
        return self.raw / self.total


def _check_bits(votes: np.ndarray) -> np.ndarray:
    votes = np.asarray(votes)
    if votes.ndim != 1 or votes.size < 1:
        raise ValueError("votes must be a non-empty vector")
    if not np.isin(votes, (0, 1)).all():
        raise ValueError("votes must be bits")
    return votes.astype(np.int64)


def majority_vote(votes: np.ndarray) -> int:
    """1 iff strictly more than half the votes are 1; ties go to 0."""
    votes = _check_bits(votes)
    return int(votes.sum() * 2 > votes.size)


def weighted_vote(votes: np.ndarray, weights: VoterWeights) -> int:
    """1 iff the normalized weight mass on class 1 exceeds 1/2; ties go to 0.

    All-zero weights fall back to unweighted majority with a warning.
    """
    votes = _check_bits(votes)
    if weights.raw.size != votes.size:
        raise ValueError("weights length must match votes")
    if weights.total == 0.0:
        warnings.warn(
            "all voter weights are zero; falling back to unweighted majority",
            DegenerateWeightsWarning,
            stacklevel=2,
        )
        return majority_vote(votes)
    mass_one = float(weights.normalized[votes == 1].sum())
    return int(mass_one > 0.5)


def error_weights(clean_accuracy: np.ndarray, flip_rate: np.ndarray) -> VoterWeights:
    """Per-member probability of being correct under output flips:
    ``acc * (1 - p) + (1 - acc) * p``. With p = 0 this is the clean accuracy."""
    acc = np.asarray(clean_accuracy, dtype=np.float64)
    p = np.asarray(flip_rate, dtype=np.float64)
    if acc.shape != p.shape or acc.ndim != 1:
        raise ValueError("accuracy and flip-rate vectors must share a 1-D shape")
    if np.any((acc < 0) | (acc > 1)) or np.any((p < 0) | (p > 1)):
        raise ValueError("accuracies and flip rates must lie in [0, 1]")
    return VoterWeights(acc * (1.0 - p) + (1.0 - acc) * p)


def map_vote(votes: np.ndarray, weights: VoterWeights, labels: np.ndarray) -> int:
    """Pick the label with the largest total weight among its voters; ties go
    to the smallest label. For two labels {0, 1} this agrees with the weighted
    vote whenever the latter is not at an exact tie."""
    votes = np.asarray(votes)
    labels = np.asarray(labels)
    if votes.ndim != 1 or votes.size < 1:
        raise ValueError("votes must be a non-empty vector")
    if weights.raw.size != votes.size:
        raise ValueError("weights length must match votes")
    if labels.ndim != 1 or labels.size < 1:
        raise ValueError("labels must be a non-empty vector")
    if not np.isin(votes, labels).all():
        raise ValueError("every vote must be one of the candidate labels")
    scores = np.array([weights.raw[votes == label].sum() for label in labels])
    best = scores.max()
    return int(np.sort(labels[scores == best])[0])


# Batched variants for the sweep paths: votes as (L, n) bit matrices.

def majority_vote_batch(votes: np.ndarray) -> np.ndarray:
    votes = np.asarray(votes, dtype=np.int64)
    return (votes.sum(axis=0) * 2 > votes.shape[0]).astype(np.uint8)


def weighted_vote_batch(votes: np.ndarray, weights: VoterWeights) -> np.ndarray:
    votes = np.asarray(votes, dtype=np.float64)
    if weights.total == 0.0:
        warnings.warn(
            "all voter weights are zero; falling back to unweighted majority",
            DegenerateWeightsWarning,
            stacklevel=2,
        )
        return majority_vote_batch(votes.astype(np.int64))
    mass_one = weights.normalized @ votes
    return (mass_one > 0.5).astype(np.uint8)
