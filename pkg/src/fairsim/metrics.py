"""Effectiveness and fairness measurement.

Effectiveness is examination-weighted DCG, tracked per query either as a
discounted running sum over sessions (cum-NDCG) or as an undiscounted average
recoverable from accumulated exposure (aver-NDCG). Fairness is the negative
mean squared pairwise exposure disparity: optimal when every item's cumulative
exposure is proportional to its relevance.

Items are addressed by their canonical position (0-based index in the query's
item order); an ExposureLedger row d is the item at position d.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .user_model import ExaminationCurve


@dataclass(frozen=True)
class MetricConfig:
    """Evaluation parameters: discount factor, report cutoffs, session length."""

    gamma: float = 0.995
    cutoffs: tuple[int, ...] = (1, 3, 5)
    k_s: int = 5

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must be in [0, 1], got {self.gamma}")
        if any(c < 1 or c > self.k_s for c in self.cutoffs):
            raise ValueError(f"cutoffs {self.cutoffs} must lie in [1, k_s={self.k_s}]")


class ExposureLedger:
    """Per-query cumulative exposure at every cutoff, plus click counts.

    exposure[d, c] is item d's accumulated examination probability over ranks
    1..c+1 of all served sessions; cum_clicks[d] counts its clicks. Exposure is
    non-decreasing in both the session count and the cutoff.
    """

    __slots__ = ("exposure", "cum_clicks", "sessions_served", "_inc_cache")

    def __init__(self, n_items: int, k_s: int):
        if n_items < 1:
            raise ValueError(f"n_items must be >= 1, got {n_items}")
        self.exposure = np.zeros((n_items, k_s))
        self.cum_clicks = np.zeros(n_items)
        self.sessions_served = 0
        self._inc_cache: dict[int, np.ndarray] = {}

    @property
    def n_items(self) -> int:
        return self.exposure.shape[0]

    @property
    def k_s(self) -> int:
        return self.exposure.shape[1]

    @property
    def total_exposure(self) -> np.ndarray:
        """Exposure at the full cutoff k_s (read-only view)."""
        return self.exposure[:, -1]

    def exposure_at(self, k_c: int) -> np.ndarray:
        if k_c < 1 or k_c > self.k_s:
            raise ValueError(f"k_c {k_c} outside [1, {self.k_s}]")
        return self.exposure[:, k_c - 1]


def record_session(
    ledger: ExposureLedger,
    ranklist: np.ndarray,
    clicks: np.ndarray,
    curve: ExaminationCurve,
) -> ExposureLedger:
    """Fold one served session into the ledger (mutates and returns it).

    The item at rank j gains examination weight P_j at every cutoff >= j, and
    one click where the click vector says so.
    """
    ranklist = np.asarray(ranklist)
    length = len(ranklist)
    if len(np.unique(ranklist)) != length:
        raise ValueError(f"ranklist contains duplicate items: {ranklist.tolist()}")
    inc = ledger._inc_cache.get(length)
    if inc is None:
        # inc[j, c] = P_{j+1} for cutoffs c+1 >= rank j+1, else 0
        inc = np.zeros((length, ledger.k_s))
        probs = curve.prefix(length)
        for j in range(length):
            inc[j, j:] = probs[j]
        ledger._inc_cache[length] = inc
    ledger.exposure[ranklist] += inc
    ledger.cum_clicks[ranklist] += np.asarray(clicks)
    ledger.sessions_served += 1
    return ledger


def dcg_at(
    ranklist: np.ndarray,
    relevance: np.ndarray,
    k_c: int,
    curve: ExaminationCurve,
) -> float:
    """Examination-weighted DCG of the top-k_c prefix of a ranklist."""
    if k_c < 1:
        raise ValueError(f"k_c must be >= 1, got {k_c}")
    ranklist = np.asarray(ranklist)
    m = min(k_c, len(ranklist))
    weights = curve.prefix(m)
    return float(np.asarray(relevance)[ranklist[:m]] @ weights)


def ideal_dcg(relevance: np.ndarray, k_c: int, curve: ExaminationCurve) -> float:
    """DCG of the relevance-descending ordering (ties keep canonical order)."""
    relevance = np.asarray(relevance, dtype=float)
    if relevance.size == 0:
        raise ValueError("need at least one item")
    order = np.argsort(-relevance, kind="stable")
    return dcg_at(order, relevance, k_c, curve)


def cum_ndcg_update(state: float, new_ranklist_dcg: float, ideal: float, gamma: float) -> float:
    """One step of the discounted running NDCG sum: gamma * state + dcg / ideal.

    Callers must exclude queries whose ideal DCG is zero before updating.
    """
    if ideal <= 0.0:
        raise ValueError(f"ideal DCG must be positive, got {ideal}")
    return gamma * state + new_ranklist_dcg / ideal


def unfairness(exposure: np.ndarray, relevance: np.ndarray) -> float:
    """Mean squared pairwise exposure disparity (zero iff exposure is
    proportional to relevance, for positive relevance).

    Computes (1 / (n(n-1))) * sum over pairs of (E_x R_y - E_y R_x)^2; the
    diagonal terms vanish identically. Fewer than two items yields 0.
    """
    exposure = np.asarray(exposure, dtype=float)
    relevance = np.asarray(relevance, dtype=float)
    if exposure.shape != relevance.shape:
        raise ValueError(f"shape mismatch {exposure.shape} vs {relevance.shape}")
    n = exposure.size
    if n < 2:
        return 0.0
    cross = np.outer(exposure, relevance)
    disparity = cross - cross.T
    return float(np.sum(disparity * disparity) / (n * (n - 1)))


def aver_ndcg_from_exposure(
    exposure: np.ndarray,
    relevance: np.ndarray,
    ideal: float,
    t: int,
) -> float:
    """Session-averaged NDCG recovered from accumulated exposure at one cutoff.

    Identity: sum_d R(d) * E@k_c(d) / (t * ideal) equals the mean over the t
    served sessions of DCG@k_c / ideal.
    """
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    if ideal <= 0.0:
        raise ValueError(f"ideal DCG must be positive, got {ideal}")
    return float(np.asarray(relevance) @ np.asarray(exposure) / (t * ideal))
