"""Exposure-planning quadratic programs and their solver.

Phase 1 of the two-phase ranking pipeline: decide how much marginal exposure
each item should receive over the next planning horizon. The objective is the
exact quadratic fairness gain; constraints pin the total exposure mass to what
the horizon's ranklists will emit, keep a configurable share of the ideal
effectiveness mass, and box each item between zero and the best-rank ceiling.
The online variant adds per-item slack variables that price unmet
minimum-exposure targets into the objective, which is what drives exploration
while relevance is still being estimated from clicks.

Problems are carried in an explicit canonical minimization form so the backend
is swappable. The backend is OSQP, an operator-splitting (ADMM) method with
diagonal preconditioning, run at tight tolerances with a fixed rho-adaptation
interval so solves are deterministic; every solution is KKT-checked here
before it is accepted.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import osqp
import scipy.sparse as sp

from .fairness import build_quadratic
from .user_model import ExaminationCurve

logger = logging.getLogger(__name__)

KKT_TOL = 1e-6
RAW_FEASIBILITY_TOL = 1e-4

_OSQP_SETTINGS = dict(
    verbose=False,
    eps_abs=1e-8,
    eps_rel=1e-8,
    max_iter=50_000,
    polishing=True,
    # time-triggered rho adaptation is nondeterministic; pin the interval
    adaptive_rho_interval=25,
)


class QpSolverError(RuntimeError):
    """Solve did not produce a certified solution (infeasible, iteration cap,
    or KKT residuals above tolerance). Never returned as a partial answer."""


@dataclass(frozen=True)
class PlannerConfig:
    """Exposure-planning knobs.

    delta_t: planning horizon in sessions. alpha in [0, 1] relaxes the
    effectiveness constraint (1 keeps fairness unconstrained by NDCG).
    beta and e_min only matter in online mode: beta weights the exploration
    slack penalty and e_min is the per-item minimum-exposure target.
    """

    delta_t: int = 50
    alpha: float = 1.0
    beta: float = 1.0
    e_min: float = 10.0
    mode: str = "post_processing"

    def __post_init__(self):
        if self.delta_t < 1:
            raise ValueError(f"delta_t must be >= 1, got {self.delta_t}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if self.beta < 0.0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.e_min < 0.0:
            raise ValueError(f"e_min must be >= 0, got {self.e_min}")
        if self.mode not in ("post_processing", "online"):
            raise ValueError(f"unknown mode {self.mode!r}")


@dataclass(frozen=True)
class QpProblem:
    """Canonical convex QP: minimize 0.5 x'Qx + c'x subject to
    eq_matrix x = eq_rhs, ge_matrix x >= ge_rhs, lower <= x <= upper."""

    quadratic: np.ndarray
    linear: np.ndarray
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray
    ge_matrix: np.ndarray
    ge_rhs: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        m = self.linear.size
        if self.quadratic.shape != (m, m):
            raise ValueError("quadratic/linear dimension mismatch")
        if not np.allclose(self.quadratic, self.quadratic.T, atol=1e-10):
            raise ValueError("quadratic matrix must be symmetric")
        for mat, rhs in ((self.eq_matrix, self.eq_rhs), (self.ge_matrix, self.ge_rhs)):
            if mat.shape != (rhs.size, m):
                raise ValueError("constraint dimension mismatch")
        if self.lower.shape != (m,) or self.upper.shape != (m,):
            raise ValueError("bound dimension mismatch")

    @property
    def n_var(self) -> int:
        return self.linear.size

    def objective(self, x: np.ndarray) -> float:
        """Minimization-form objective value at x."""
        return float(0.5 * x @ self.quadratic @ x + self.linear @ x)


@dataclass
class QpSolution:
    """Raw certified solver output plus the problem it solves."""

    x: np.ndarray
    duals: np.ndarray  # one multiplier per stacked row: eq, ge, then box
    objective: float  # minimization form
    iterations: int
    residuals: dict[str, float]
    problem: QpProblem


@dataclass(frozen=True)
class ExposurePlan:
    """Planned marginal exposure for one query over the next delta_t sessions.

    delta_e sums exactly to the horizon's total exposure mass and respects
    [0, delta_t * P_1] per item; slack carries the online exploration
    variables. objective_value is the achieved fairness gain minus the
    exploration penalty (maximization form).
    """

    delta_e: np.ndarray
    slack: np.ndarray | None = None
    objective_value: float = float("nan")


def _effective_length(n_items: int, curve: ExaminationCurve) -> int:
    return min(curve.k_s, n_items)


def horizon_budget(n_items: int, curve: ExaminationCurve, delta_t: int) -> float:
    """Total exposure mass the next delta_t sessions will emit for this query."""
    length = _effective_length(n_items, curve)
    return float(delta_t * curve.probs[:length].sum())


def _ideal_effectiveness_mass(
    relevance_est: np.ndarray, curve: ExaminationCurve, delta_t: int
) -> float:
    # descending relevance, canonical order on ties, as in the ideal ranklist
    order = np.argsort(-relevance_est, kind="stable")
    length = _effective_length(relevance_est.size, curve)
    return float(delta_t * (curve.probs[:length] @ relevance_est[order[:length]]))


def _validate_planning_inputs(exposure: np.ndarray, relevance_est: np.ndarray):
    if exposure.shape != relevance_est.shape:
        raise ValueError(f"shape mismatch {exposure.shape} vs {relevance_est.shape}")
    if exposure.size < 2:
        raise ValueError("exposure planning needs at least 2 items")
    if not np.isfinite(relevance_est).all() or (relevance_est < 0).any():
        raise ValueError("relevance estimates must be finite and non-negative")


def build_post_qp(
    exposure: np.ndarray,
    relevance_est: np.ndarray,
    curve: ExaminationCurve,
    config: PlannerConfig,
) -> QpProblem:
    """Assemble the post-processing planning QP over per-item delta_e.

    Maximizing the fairness gain G.x - 0.5 x'Hx becomes minimizing
    0.5 x'Hx - G.x. Constraints: the delta_e mass equals the horizon budget;
    the planned effectiveness mass R.x stays above (1 - alpha) times the ideal
    mass; each delta_e lies in [0, delta_t * P_1] because an item appears at
    most once per ranklist.

    `exposure` is the query's cumulative top-k_s exposure to date (the
    ledger's total_exposure row block).
    """
    exposure = np.asarray(exposure, dtype=float)
    relevance_est = np.asarray(relevance_est, dtype=float)
    _validate_planning_inputs(exposure, relevance_est)
    n = exposure.size
    quad = build_quadratic(exposure, relevance_est)
    budget = horizon_budget(n, curve, config.delta_t)
    ndcg_rhs = (1.0 - config.alpha) * _ideal_effectiveness_mass(
        relevance_est, curve, config.delta_t
    )
    return QpProblem(
        quadratic=quad.hessian,
        linear=-quad.gradient,
        eq_matrix=np.ones((1, n)),
        eq_rhs=np.array([budget]),
        ge_matrix=relevance_est.reshape(1, n),
        ge_rhs=np.array([ndcg_rhs]),
        lower=np.zeros(n),
        upper=np.full(n, config.delta_t * float(curve.probs[0])),
    )


def build_online_qp(
    exposure: np.ndarray,
    relevance_est: np.ndarray,
    curve: ExaminationCurve,
    config: PlannerConfig,
) -> QpProblem:
    """Assemble the online planning QP over stacked [delta_e; slack] variables.

    On top of the post-processing constraints, each item gets a slack s(d) >= 0
    with s(d) + delta_e(d) >= e_min - exposure(d), and the objective pays
    beta per unit of slack, so items short of the minimum-exposure target pull
    planned exposure toward themselves. Historical exposure enters as observed
    data, not as a decision variable.
    """
    exposure = np.asarray(exposure, dtype=float)
    relevance_est = np.asarray(relevance_est, dtype=float)
    _validate_planning_inputs(exposure, relevance_est)
    if config.mode != "online":
        raise ValueError("build_online_qp requires config.mode == 'online'")
    n = exposure.size
    base = build_post_qp(exposure, relevance_est, curve, config)

    quadratic = np.zeros((2 * n, 2 * n))
    quadratic[:n, :n] = base.quadratic
    linear = np.concatenate([base.linear, np.full(n, config.beta)])
    eq_matrix = np.hstack([base.eq_matrix, np.zeros((1, n))])
    ge_matrix = np.vstack(
        [
            np.hstack([base.ge_matrix, np.zeros((1, n))]),
            np.hstack([np.eye(n), np.eye(n)]),  # delta_e + s >= e_min - exposure
        ]
    )
    ge_rhs = np.concatenate([base.ge_rhs, config.e_min - exposure])
    return QpProblem(
        quadratic=quadratic,
        linear=linear,
        eq_matrix=eq_matrix,
        eq_rhs=base.eq_rhs,
        ge_matrix=ge_matrix,
        ge_rhs=ge_rhs,
        lower=np.concatenate([base.lower, np.zeros(n)]),
        upper=np.concatenate([base.upper, np.full(n, np.inf)]),
    )


def _stacked_constraints(problem: QpProblem):
    """Stack eq, ge and box rows into OSQP's l <= Ax <= u form."""
    m = problem.n_var
    a = np.vstack([problem.eq_matrix, problem.ge_matrix, np.eye(m)])
    lo = np.concatenate([problem.eq_rhs, problem.ge_rhs, problem.lower])
    hi = np.concatenate(
        [problem.eq_rhs, np.full(problem.ge_rhs.size, np.inf), problem.upper]
    )
    return a, lo, hi


def kkt_residuals(problem: QpProblem, x: np.ndarray, duals: np.ndarray) -> dict[str, float]:
    """Scaled primal, stationarity and complementarity residuals at (x, duals).

    Duals follow the stacked-row sign convention (positive pushes toward the
    upper bound); each residual is normalized by the magnitude of the terms
    entering it so the tolerance behaves uniformly across problem scales.
    """
    a, lo, hi = _stacked_constraints(problem)
    ax = a @ x
    qx = problem.quadratic @ x
    aty = a.T @ duals

    prim = np.maximum(np.maximum(lo - ax, 0.0), np.maximum(ax - hi, 0.0))
    prim_scale = max(1.0, float(np.abs(ax).max(initial=0.0)))

    stat = qx + problem.linear + aty
    stat_scale = max(
        1.0,
        float(np.abs(qx).max(initial=0.0)),
        float(np.abs(problem.linear).max(initial=0.0)),
        float(np.abs(aty).max(initial=0.0)),
    )

    up_gap = np.where(np.isinf(hi), 1.0, np.abs(hi - ax))
    lo_gap = np.where(np.isinf(lo), 1.0, np.abs(ax - lo))
    comp = np.maximum(duals, 0.0) * up_gap + np.maximum(-duals, 0.0) * lo_gap
    comp_scale = max(1.0, float(np.abs(duals).max(initial=0.0)), prim_scale)

    return {
        "primal": float(prim.max(initial=0.0)) / prim_scale,
        "stationarity": float(np.abs(stat).max(initial=0.0)) / stat_scale,
        "complementarity": float(comp.max(initial=0.0)) / comp_scale,
    }


def solve(problem: QpProblem) -> QpSolution:
    """Solve a canonical QP to certified KKT tolerance.

    Raises QpSolverError when the backend reports failure or the recomputed
    KKT residuals exceed 1e-6; callers never see a silent partial answer.
    Deterministic for fixed inputs.
    """
    a, lo, hi = _stacked_constraints(problem)
    solver = osqp.OSQP()
    solver.setup(
        sp.csc_matrix(problem.quadratic),
        problem.linear.copy(),
        sp.csc_matrix(a),
        lo,
        hi,
        **_OSQP_SETTINGS,
    )
    result = solver.solve(raise_error=False)
    status = result.info.status
    if status != "solved" or result.x is None:
        raise QpSolverError(f"QP solve failed: status={status!r}")
    x = np.asarray(result.x, dtype=float)
    duals = np.asarray(result.y, dtype=float)
    residuals = kkt_residuals(problem, x, duals)
    worst = max(residuals.values())
    if worst > KKT_TOL:
        raise QpSolverError(f"KKT residuals above tolerance: {residuals}")
    return QpSolution(
        x=x,
        duals=duals,
        objective=problem.objective(x),
        iterations=int(result.info.iter),
        residuals=residuals,
        problem=problem,
    )


def repair_plan(
    raw: QpSolution,
    curve: ExaminationCurve,
    config: PlannerConfig,
) -> ExposurePlan:
    """Clean solver tolerance off a planning solution so the allocation phase
    receives an exactly feasible plan.

    Clamps each delta_e into [0, delta_t * P_1], rescales proportionally to
    restore the exact budget, and if the rescale pushed entries over the
    ceiling clamps once more, spreading the residual over unclamped items.
    Raw solutions further than 1e-4 from feasibility are rejected outright:
    that signals a solver bug, not tolerance noise.
    """
    n_var = raw.problem.n_var
    n = n_var // 2 if config.mode == "online" else n_var
    delta_e = np.array(raw.x[:n], dtype=float)
    slack = None
    if config.mode == "online":
        slack = np.maximum(raw.x[n:], 0.0)

    budget = horizon_budget(n, curve, config.delta_t)
    cap = config.delta_t * float(curve.probs[0])
    tol = RAW_FEASIBILITY_TOL * max(1.0, budget)
    if (
        abs(delta_e.sum() - budget) > tol
        or (delta_e < -RAW_FEASIBILITY_TOL).any()
        or (delta_e > cap + RAW_FEASIBILITY_TOL).any()
    ):
        raise QpSolverError(
            f"raw plan violates feasibility beyond {RAW_FEASIBILITY_TOL}: "
            f"sum={delta_e.sum():.6f} budget={budget:.6f}"
        )

    delta_e = np.clip(delta_e, 0.0, cap)
    total = delta_e.sum()
    if total <= 0.0:
        raise QpSolverError("degenerate plan: no exposure mass to rescale")
    delta_e *= budget / total
    over = delta_e > cap
    if over.any():
        excess = float((delta_e[over] - cap).sum())
        delta_e[over] = cap
        free = ~over
        delta_e[free] += excess * delta_e[free] / delta_e[free].sum()
    # absorb the last float ulps into an entry with room in the needed direction
    residue = budget - delta_e.sum()
    if residue != 0.0:
        cand = np.flatnonzero(delta_e < cap) if residue > 0 else np.flatnonzero(delta_e > 0)
        if cand.size:
            key = (cap - delta_e[cand]) if residue > 0 else delta_e[cand]
            delta_e[cand[np.argmax(key)]] += residue

    x_rep = delta_e if slack is None else np.concatenate([delta_e, slack])
    objective_value = -raw.problem.objective(x_rep)
    return ExposurePlan(delta_e=delta_e, slack=slack, objective_value=objective_value)


def ideal_topk_plan(
    relevance_est: np.ndarray,
    curve: ExaminationCurve,
    config: PlannerConfig,
) -> ExposurePlan:
    """Feasibility witness: give the j-th most relevant item the full mass of
    rank j across the horizon. Satisfies every planning constraint for any
    alpha, so it doubles as the fallback when a solve fails."""
    relevance_est = np.asarray(relevance_est, dtype=float)
    n = relevance_est.size
    length = _effective_length(n, curve)
    order = np.argsort(-relevance_est, kind="stable")
    delta_e = np.zeros(n)
    delta_e[order[:length]] = config.delta_t * curve.probs[:length]
    return ExposurePlan(delta_e=delta_e, slack=None, objective_value=float("nan"))
