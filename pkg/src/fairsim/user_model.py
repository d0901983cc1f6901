"""Simulated user behavior: position- and selection-biased examination, noisy clicks.

Examination decays as 1/log2(rank + 1) down to a hard cutoff rank, below which
nothing is examined. Clicks are relevance gated by examination: an item is
clicked iff it is examined and perceived as relevant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def examination_prob(rank: int, k_s: int) -> float:
    """Examination probability at a 1-indexed rank, zero below the cutoff k_s."""
    if rank < 1:
        raise ValueError(f"rank must be >= 1, got {rank}")
    if rank > k_s:
        return 0.0
    return 1.0 / math.log2(rank + 1)


@dataclass(frozen=True)
class ExaminationCurve:
    """Per-rank examination probabilities truncated at the cutoff rank k_s.

    probs[i] is the examination probability at rank i+1; ranks past k_s are
    never examined. Probabilities must be positive and non-increasing.
    """

    k_s: int
    probs: np.ndarray

    def __post_init__(self):
        if self.k_s < 1:
            raise ValueError(f"k_s must be >= 1, got {self.k_s}")
        probs = np.asarray(self.probs, dtype=float)
        if probs.shape != (self.k_s,):
            raise ValueError(f"expected {self.k_s} probabilities, got shape {probs.shape}")
        if not (probs > 0).all():
            raise ValueError("examination probabilities must be positive")
        if (np.diff(probs) > 0).any():
            raise ValueError("examination probabilities must be non-increasing")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def log_decay(cls, k_s: int) -> "ExaminationCurve":
        """The standard 1/log2(rank + 1) curve truncated at k_s."""
        ranks = np.arange(1, k_s + 1)
        return cls(k_s=k_s, probs=1.0 / np.log2(ranks + 1))

    def prob_at(self, rank: int) -> float:
        if rank < 1:
            raise ValueError(f"rank must be >= 1, got {rank}")
        if rank > self.k_s:
            return 0.0
        return float(self.probs[rank - 1])

    def prefix(self, length: int) -> np.ndarray:
        """Examination probabilities for the first `length` ranks (zero past k_s)."""
        if length <= self.k_s:
            return self.probs[:length]
        return np.concatenate([self.probs, np.zeros(length - self.k_s)])


@dataclass(frozen=True)
class RelevanceModel:
    """Maps graded judgments to click-relevance probabilities with a noise floor.

    P(relevant | grade y) = epsilon + (1 - epsilon) * (2^y - 1) / (2^y_max - 1)
    """

    y_max: int
    epsilon: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.epsilon < 1.0:
            raise ValueError(f"epsilon must be in [0, 1), got {self.epsilon}")
        if self.y_max < 1:
            raise ValueError(f"y_max must be >= 1, got {self.y_max}")


def relevance_prob(grade: int, model: RelevanceModel) -> float:
    """Relevance probability of a single graded judgment."""
    if grade < 0 or grade > model.y_max:
        raise ValueError(f"grade {grade} outside [0, {model.y_max}]")
    frac = (2.0**grade - 1.0) / (2.0**model.y_max - 1.0)
    return model.epsilon + (1.0 - model.epsilon) * frac


def relevance_probs(grades: np.ndarray, model: RelevanceModel) -> np.ndarray:
    """Vectorized `relevance_prob` over an array of grades."""
    grades = np.asarray(grades)
    if grades.size and (grades.min() < 0 or grades.max() > model.y_max):
        raise ValueError(f"grades outside [0, {model.y_max}]")
    frac = (np.exp2(grades.astype(float)) - 1.0) / (2.0**model.y_max - 1.0)
    return model.epsilon + (1.0 - model.epsilon) * frac


def simulate_clicks(
    ranklist: np.ndarray,
    relevance: np.ndarray,
    curve: ExaminationCurve,
    rng: np.random.Generator,
) -> np.ndarray:
    """Draw one binary click per rank of a served ranklist.

    Each rank i is clicked independently with probability
    P(examined at i) * P(relevant), so ranks past the cutoff never click.
    Draws consume the rng in rank order, one uniform per rank.
    """
    ranklist = np.asarray(ranklist)
    p = np.asarray(relevance)[ranklist] * curve.prefix(len(ranklist))
    return (rng.random(len(ranklist)) < p).astype(np.int8)
