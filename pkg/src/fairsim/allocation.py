"""Phase 2: turn an exposure plan into concrete ranklists.

Vertical allocation fills the planned sessions rank-first: every session's
rank 1, then every session's rank 2, and so on. At each slot it places the
most relevant item that is not already in that session and still has at least
the slot's examination weight left in its plan; when no item has both
properties, the slot falls back to any item not yet in the session. Filling
top ranks first lets relevant items spend their budget at the best ranks,
which is what makes the realized lists effective at every cutoff
simultaneously. The horizontal variant (session-first fill) exists as a
baseline contrast.

Whatever the fill order, at most k_s items can end up short of their plan by
more than the last rank's examination weight.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qp import ExposurePlan
from .user_model import ExaminationCurve

# Set-membership threshold slack: the >= comparison against the slot weight is
# exact in real arithmetic but accumulated float error in realized exposure
# needs an absolute allowance.
BUDGET_SLACK = 1e-9


@dataclass(frozen=True)
class RanklistBuffer:
    """delta_t precomputed ranklists plus the exposure their service delivers.

    ranklists has shape (delta_t, length) of canonical item indices, each row
    duplicate-free; realized_exposure[d] is the exact examination mass item d
    collects over all rows.
    """

    ranklists: np.ndarray
    realized_exposure: np.ndarray


@dataclass(frozen=True)
class AllocationResiduals:
    """Per-item plan-minus-realized exposure and the count of bound breakers."""

    residuals: np.ndarray
    violation_count: int
    bound: float


def _plan_vector(plan: ExposurePlan | np.ndarray) -> np.ndarray:
    delta_e = plan.delta_e if isinstance(plan, ExposurePlan) else plan
    return np.asarray(delta_e, dtype=float)


def _allocate(
    delta_e: np.ndarray,
    delta_t: int,
    curve: ExaminationCurve,
    relevance_est: np.ndarray,
    rank_major: bool,
    select: str,
) -> RanklistBuffer:
    n = delta_e.size
    if relevance_est.shape != (n,):
        raise ValueError(f"relevance shape {relevance_est.shape} != ({n},)")
    if delta_t < 1:
        raise ValueError(f"delta_t must be >= 1, got {delta_t}")
    if select not in ("most_relevant", "least_relevant"):
        raise ValueError(f"unknown selection rule {select!r}")
    length = min(curve.k_s, n)
    probs = curve.probs[:length]
    # argmax over a masked copy; ties resolve to the lowest canonical index
    score = relevance_est if select == "most_relevant" else -relevance_est

    lists = np.empty((delta_t, length), dtype=np.int64)
    in_session = np.zeros((delta_t, n), dtype=bool)
    remaining = delta_e.copy()
    realized = np.zeros(n)

    if rank_major:
        slots = ((rnk, sess) for rnk in range(length) for sess in range(delta_t))
    else:
        slots = ((rnk, sess) for sess in range(delta_t) for rnk in range(length))
    masked = np.empty(n)
    for rnk, sess in slots:
        weight = probs[rnk]
        eligible = (remaining >= weight - BUDGET_SLACK) & ~in_session[sess]
        if not eligible.any():
            eligible = ~in_session[sess]
        np.copyto(masked, score)
        masked[~eligible] = -np.inf
        winner = int(np.argmax(masked))
        lists[sess, rnk] = winner
        in_session[sess, winner] = True
        remaining[winner] -= weight
        realized[winner] += weight
    return RanklistBuffer(ranklists=lists, realized_exposure=realized)


def vertical_allocate(
    plan: ExposurePlan | np.ndarray,
    delta_t: int,
    curve: ExaminationCurve,
    relevance_est: np.ndarray,
    select: str = "most_relevant",
) -> RanklistBuffer:
    """Construct delta_t ranklists realizing a plan, filling rank-first.

    `select` swaps the relevance argmax for an argmin; any selection rule
    keeps the residual bound, which is useful for property testing.
    """
    return _allocate(
        _plan_vector(plan), delta_t, curve, np.asarray(relevance_est, dtype=float),
        rank_major=True, select=select,
    )


def horizontal_allocate(
    plan: ExposurePlan | np.ndarray,
    delta_t: int,
    curve: ExaminationCurve,
    relevance_est: np.ndarray,
    select: str = "most_relevant",
) -> RanklistBuffer:
    """Session-first variant of vertical_allocate (baseline contrast)."""
    return _allocate(
        _plan_vector(plan), delta_t, curve, np.asarray(relevance_est, dtype=float),
        rank_major=False, select=select,
    )


def allocation_residuals(
    plan: ExposurePlan | np.ndarray,
    buffer: RanklistBuffer,
    curve: ExaminationCurve,
) -> AllocationResiduals:
    """Plan-minus-realized exposure, with the count of items whose shortfall
    exceeds the last examined rank's weight (guaranteed <= k_s of them)."""
    delta_e = _plan_vector(plan)
    residuals = delta_e - buffer.realized_exposure
    length = buffer.ranklists.shape[1]
    bound = float(curve.probs[length - 1])
    violation_count = int((residuals > bound + BUDGET_SLACK).sum())
    return AllocationResiduals(residuals=residuals, violation_count=violation_count, bound=bound)
