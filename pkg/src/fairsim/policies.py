"""Session-serving ranking policies.

Two planning policies (rank-first and session-first buffered planners) and
four greedy baselines (relevance sort, random, proportional-controller rerank,
gradient rerank) behind one dispatch. In the post-processing setting every
policy scores with true relevance; in the online setting every policy scores
with the click-based estimate only, and never sees the truth.

The click-based estimate is the ratio of cumulative clicks to cumulative
examination mass, which is unbiased once an item has been examined; items
with no exposure yet estimate to zero, and exploration is the planner's job
(its minimum-exposure slack mechanism), not the estimator's.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .allocation import horizontal_allocate, vertical_allocate
from .fairness import build_quadratic
from .metrics import ExposureLedger
from .qp import (
    PlannerConfig,
    QpSolverError,
    build_online_qp,
    build_post_qp,
    ideal_topk_plan,
    repair_plan,
    solve,
)
from .user_model import ExaminationCurve

logger = logging.getLogger(__name__)

POLICY_KINDS = ("fara", "fara_horiz", "topk", "randomk", "fairco", "mcfair")
SETTINGS = ("post_processing", "online")
PLANNING_KINDS = ("fara", "fara_horiz")


@dataclass(frozen=True)
class PolicyConfig:
    kind: str
    setting: str = "post_processing"
    alpha: float = 1.0
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    curve: ExaminationCurve = field(default_factory=lambda: ExaminationCurve.log_decay(5))

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}")
        if self.alpha < 0.0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if self.kind in PLANNING_KINDS and self.planner.mode != self.setting:
            raise ValueError(
                f"planner mode {self.planner.mode!r} must match setting {self.setting!r}"
            )


@dataclass
class QueryState:
    """Mutable per-query serving state owned by a single simulation worker."""

    ledger: ExposureLedger
    true_relevance: np.ndarray
    relevance_est: np.ndarray
    buffer: list[np.ndarray] = field(default_factory=list)
    plan_fallbacks: int = 0

    @property
    def n(self) -> int:
        return self.ledger.n_items


def estimate_relevance(ledger: ExposureLedger, item: int) -> float:
    """Click-through estimate for one item: cumulative clicks over exposure,
    zero before the item has ever been examined."""
    exposure = float(ledger.total_exposure[item])
    if exposure <= 0.0:
        return 0.0
    return float(ledger.cum_clicks[item]) / exposure


def estimate_relevance_all(ledger: ExposureLedger) -> np.ndarray:
    """Vectorized estimate_relevance over every item of the query."""
    exposure = ledger.total_exposure
    est = np.zeros(ledger.n_items)
    seen = exposure > 0.0
    est[seen] = ledger.cum_clicks[seen] / exposure[seen]
    return est


def _working_relevance(state: QueryState, config: PolicyConfig) -> np.ndarray:
    # the setting controls the only relevance signal a policy may read
    if config.setting == "post_processing":
        return state.true_relevance
    return state.relevance_est


def _sorted_prefix(score: np.ndarray, length: int) -> np.ndarray:
    # stable descending sort keeps canonical order on ties
    return np.argsort(-score, kind="stable")[:length]


def _ranklist_length(state: QueryState, config: PolicyConfig) -> int:
    return min(config.curve.k_s, state.n)


def topk_next(state: QueryState, config: PolicyConfig) -> np.ndarray:
    """Pure relevance sort, truncated to the served length."""
    return _sorted_prefix(_working_relevance(state, config), _ranklist_length(state, config))


def randomk_next(
    state: QueryState, config: PolicyConfig, rng: np.random.Generator
) -> np.ndarray:
    """Uniformly random ranklist prefix."""
    return rng.permutation(state.n)[: _ranklist_length(state, config)]


def fairco_next(state: QueryState, config: PolicyConfig) -> np.ndarray:
    """Proportional-controller rerank: boost each item by its worst pairwise
    exposure deficit, score(d) = R(d) + alpha * max(0, max_d' E(d')R(d) - E(d)R(d'))."""
    rel = _working_relevance(state, config)
    if state.n == 1:
        return np.zeros(1, dtype=np.int64)
    exposure = state.ledger.total_exposure
    cross = np.outer(rel, exposure)  # cross[d, d'] = R(d) E(d')
    deficit = cross - np.outer(exposure, rel)
    err = np.maximum(deficit.max(axis=1), 0.0)
    return _sorted_prefix(rel + config.alpha * err, _ranklist_length(state, config))


def mcfair_next(state: QueryState, config: PolicyConfig) -> np.ndarray:
    """Gradient rerank: score(d) = R(d) + alpha * G(d) with G the fairness
    gradient at the current exposure point."""
    rel = _working_relevance(state, config)
    if state.n == 1:
        return np.zeros(1, dtype=np.int64)
    quad = build_quadratic(state.ledger.total_exposure, rel)
    return _sorted_prefix(rel + config.alpha * quad.gradient, _ranklist_length(state, config))


def _replan(state: QueryState, config: PolicyConfig, rng: np.random.Generator) -> None:
    rel = _working_relevance(state, config)
    planner = config.planner
    exposure = state.ledger.total_exposure
    try:
        if planner.mode == "online":
            problem = build_online_qp(exposure, rel, config.curve, planner)
        else:
            problem = build_post_qp(exposure, rel, config.curve, planner)
        plan = repair_plan(solve(problem), config.curve, planner)
    except QpSolverError as exc:
        # serving must not stall: fall back to the ideal-topk witness plan
        logger.warning("planner solve failed (%s); using ideal-topk fallback", exc)
        state.plan_fallbacks += 1
        plan = ideal_topk_plan(rel, config.curve, planner)
    allocate = vertical_allocate if config.kind == "fara" else horizontal_allocate
    buffer = allocate(plan, planner.delta_t, config.curve, rel)
    lists = [buffer.ranklists[i] for i in range(buffer.ranklists.shape[0])]
    rng.shuffle(lists)  # permutes whole ranklists; never items within one
    state.buffer = lists


def fara_next(
    state: QueryState, config: PolicyConfig, rng: np.random.Generator
) -> np.ndarray:
    """Serve from the precomputed buffer, replanning atomically when empty.

    Single-item queries have nothing to plan and are served directly. Buffers
    are served to exhaustion even as estimates drift; the plan refreshes only
    on the next empty-buffer call.
    """
    if state.n == 1:
        return np.zeros(1, dtype=np.int64)
    if not state.buffer:
        _replan(state, config, rng)
    return state.buffer.pop()


def next_ranklist(
    state: QueryState, config: PolicyConfig, rng: np.random.Generator
) -> np.ndarray:
    """Dispatch one session's ranklist for the configured policy."""
    if config.kind in PLANNING_KINDS:
        return fara_next(state, config, rng)
    if config.kind == "topk":
        return topk_next(state, config)
    if config.kind == "randomk":
        return randomk_next(state, config, rng)
    if config.kind == "fairco":
        return fairco_next(state, config)
    if config.kind == "mcfair":
        return mcfair_next(state, config)
    raise ValueError(f"unknown policy kind {config.kind!r}")
