"""Tests for planning-QP assembly, the solver contract, and plan repair."""

import numpy as np
import pytest
from oracles import reverse_kkt_instance

from fairsim.fairness import build_quadratic, marginal_fairness
from fairsim.qp import (
    PlannerConfig,
    QpProblem,
    QpSolverError,
    build_online_qp,
    build_post_qp,
    horizon_budget,
    ideal_topk_plan,
    kkt_residuals,
    repair_plan,
    solve,
)
from fairsim.user_model import ExaminationCurve


def unconstrained_problem(quadratic, linear, n):
    big = np.full(n, 1e6)
    return QpProblem(
        quadratic=quadratic,
        linear=linear,
        eq_matrix=np.zeros((0, n)),
        eq_rhs=np.zeros(0),
        ge_matrix=np.zeros((0, n)),
        ge_rhs=np.zeros(0),
        lower=-big,
        upper=big,
    )


def check_plan_feasible(delta_e, relevance, curve, config, atol=1e-9):
    n = delta_e.size
    budget = horizon_budget(n, curve, config.delta_t)
    length = min(curve.k_s, n)
    order = np.argsort(-relevance, kind="stable")
    ideal_mass = config.delta_t * float(curve.probs[:length] @ relevance[order[:length]])
    assert delta_e.sum() == pytest.approx(budget, abs=atol)
    assert (delta_e >= -atol).all()
    assert (delta_e <= config.delta_t * curve.probs[0] + atol).all()
    assert float(relevance @ delta_e) >= (1.0 - config.alpha) * ideal_mass - 1e-7


# ---------------------------------------------------------------- assembly


def test_post_qp_hand_assembled_instance():
    curve = ExaminationCurve.log_decay(1)
    config = PlannerConfig(delta_t=2, alpha=1.0)
    problem = build_post_qp(np.zeros(2), np.array([1.0, 1.0]), curve, config)
    assert problem.eq_rhs == pytest.approx([2.0])  # 2 sessions x P1
    assert problem.lower.tolist() == [0.0, 0.0]
    assert problem.upper.tolist() == [2.0, 2.0]
    assert problem.ge_rhs == pytest.approx([0.0])  # alpha=1 drops the requirement


def test_post_qp_alpha_zero_requires_full_ideal_mass():
    curve = ExaminationCurve.log_decay(1)
    config = PlannerConfig(delta_t=2, alpha=0.0)
    problem = build_post_qp(np.zeros(2), np.array([1.0, 1.0]), curve, config)
    assert problem.ge_rhs == pytest.approx([2.0])


def test_post_qp_short_query_uses_truncated_prefix():
    curve = ExaminationCurve.log_decay(5)
    config = PlannerConfig(delta_t=3, alpha=0.5)
    problem = build_post_qp(np.zeros(2), np.array([0.5, 0.1]), curve, config)
    assert problem.eq_rhs == pytest.approx([3 * (1.0 + 1.0 / np.log2(3))])


def test_post_qp_validates_inputs():
    curve = ExaminationCurve.log_decay(2)
    config = PlannerConfig(delta_t=1)
    with pytest.raises(ValueError):
        build_post_qp(np.zeros(1), np.ones(1), curve, config)
    with pytest.raises(ValueError):
        build_post_qp(np.zeros(3), np.array([0.1, -0.2, 0.3]), curve, config)


def test_ideal_topk_plan_is_feasible_for_every_alpha():
    rng = np.random.default_rng(0)
    curve = ExaminationCurve.log_decay(5)
    for _ in range(50):
        n = int(rng.integers(2, 25))
        rel = rng.random(n)
        for alpha in (0.0, 0.31, 0.7, 1.0):
            config = PlannerConfig(delta_t=int(rng.integers(1, 12)), alpha=alpha)
            plan = ideal_topk_plan(rel, curve, config)
            check_plan_feasible(plan.delta_e, rel, curve, config)


def test_online_qp_shapes_and_slack_coefficients():
    curve = ExaminationCurve.log_decay(3)
    config = PlannerConfig(delta_t=4, alpha=1.0, beta=2.5, e_min=6.0, mode="online")
    exposure = np.array([1.0, 9.0, 0.0])
    problem = build_online_qp(exposure, np.array([0.5, 0.4, 0.3]), curve, config)
    assert problem.n_var == 6
    assert not problem.quadratic[3:, :].any()  # zero block on slack rows
    assert problem.linear[3:].tolist() == [2.5, 2.5, 2.5]  # +beta in min form
    assert problem.ge_rhs[1:] == pytest.approx(6.0 - exposure)


def test_online_qp_requires_online_mode():
    curve = ExaminationCurve.log_decay(2)
    with pytest.raises(ValueError):
        build_online_qp(np.zeros(2), np.ones(2), curve, PlannerConfig(mode="post_processing"))


# ---------------------------------------------------------------- solver


def test_solve_unconstrained_interior():
    problem = unconstrained_problem(np.eye(2), np.array([-1.0, -1.0]), 2)
    solution = solve(problem)
    assert solution.x == pytest.approx([1.0, 1.0], abs=1e-6)


def test_solve_equality_only_symmetric():
    problem = QpProblem(
        quadratic=np.eye(2),
        linear=np.zeros(2),
        eq_matrix=np.ones((1, 2)),
        eq_rhs=np.array([2.0]),
        ge_matrix=np.zeros((0, 2)),
        ge_rhs=np.zeros(0),
        lower=np.full(2, -1e6),
        upper=np.full(2, 1e6),
    )
    solution = solve(problem)
    assert solution.x == pytest.approx([1.0, 1.0], abs=1e-6)
    assert max(solution.residuals.values()) <= 1e-6


def test_solve_is_deterministic():
    rng = np.random.default_rng(4)
    m = rng.normal(size=(6, 6))
    problem = build_post_qp(
        rng.random(6) * 10,
        rng.random(6),
        ExaminationCurve.log_decay(3),
        PlannerConfig(delta_t=7, alpha=0.4),
    )
    del m
    a = solve(problem)
    b = solve(problem)
    assert np.array_equal(a.x, b.x)
    assert a.objective == b.objective


def test_solve_reports_infeasible():
    problem = QpProblem(
        quadratic=np.eye(2),
        linear=np.zeros(2),
        eq_matrix=np.ones((1, 2)),
        eq_rhs=np.array([10.0]),
        ge_matrix=np.zeros((0, 2)),
        ge_rhs=np.zeros(0),
        lower=np.zeros(2),
        upper=np.ones(2),  # sum cannot exceed 2
    )
    with pytest.raises(QpSolverError):
        solve(problem)


def test_solver_against_constructed_optima():
    rng = np.random.default_rng(7)
    for _ in range(15):
        n = int(rng.integers(2, 21))
        problem, best = reverse_kkt_instance(rng, n)
        solution = solve(problem)
        assert solution.objective == pytest.approx(best, abs=1e-6, rel=1e-6)
        assert max(solution.residuals.values()) <= 1e-6


# ---------------------------------------------------------------- repair


def make_plan_solution(delta_e, rel, curve, config):
    problem = build_post_qp(np.zeros(delta_e.size), rel, curve, config)
    from fairsim.qp import QpSolution

    return QpSolution(
        x=np.asarray(delta_e, dtype=float),
        duals=np.zeros(1 + 1 + delta_e.size),
        objective=problem.objective(np.asarray(delta_e, dtype=float)),
        iterations=0,
        residuals={},
        problem=problem,
    )


def test_repair_identity_on_exact_plan():
    curve = ExaminationCurve.log_decay(1)
    config = PlannerConfig(delta_t=2, alpha=1.0)
    raw = make_plan_solution(np.array([1.5, 0.5]), np.array([0.9, 0.1]), curve, config)
    plan = repair_plan(raw, curve, config)
    assert plan.delta_e == pytest.approx([1.5, 0.5], abs=1e-15)


def test_repair_rescales_small_overshoot():
    curve = ExaminationCurve.log_decay(1)
    config = PlannerConfig(delta_t=2, alpha=1.0)
    drift = 1 + 1e-7
    raw = make_plan_solution(np.array([1.0, 1.0]) * drift, np.array([0.9, 0.1]), curve, config)
    plan = repair_plan(raw, curve, config)
    assert plan.delta_e.sum() == pytest.approx(2.0, abs=1e-12)
    assert plan.delta_e == pytest.approx([1.0, 1.0], abs=1e-9)


def test_repair_clamps_negative_dust_and_restores_budget():
    curve = ExaminationCurve.log_decay(2)
    config = PlannerConfig(delta_t=3, alpha=1.0)
    budget = horizon_budget(3, curve, 3)
    raw_vec = np.array([-1e-8, budget / 2, budget / 2 + 1e-8])
    raw = make_plan_solution(raw_vec, np.array([0.2, 0.5, 0.9]), curve, config)
    plan = repair_plan(raw, curve, config)
    assert (plan.delta_e >= 0.0).all()
    assert (plan.delta_e <= 3 * curve.probs[0] + 1e-12).all()
    assert plan.delta_e.sum() == pytest.approx(budget, abs=1e-12)


def test_repair_rejects_grossly_infeasible_input():
    curve = ExaminationCurve.log_decay(1)
    config = PlannerConfig(delta_t=2, alpha=1.0)
    raw = make_plan_solution(np.array([5.0, 5.0]), np.array([0.9, 0.1]), curve, config)
    with pytest.raises(QpSolverError):
        repair_plan(raw, curve, config)


# ---------------------------------------------------------------- contracts


def test_objective_bookkeeping_matches_marginal_fairness():
    rng = np.random.default_rng(9)
    curve = ExaminationCurve.log_decay(5)
    for _ in range(10):
        n = int(rng.integers(2, 15))
        exposure = rng.random(n) * 30
        rel = rng.random(n)
        config = PlannerConfig(delta_t=int(rng.integers(1, 20)), alpha=float(rng.random()))
        plan = repair_plan(solve(build_post_qp(exposure, rel, curve, config)), curve, config)
        quad = build_quadratic(exposure, rel)
        assert plan.objective_value == pytest.approx(
            marginal_fairness(quad, plan.delta_e), abs=1e-8
        )


def test_online_objective_includes_slack_penalty():
    rng = np.random.default_rng(10)
    curve = ExaminationCurve.log_decay(5)
    config = PlannerConfig(delta_t=10, alpha=1.0, beta=3.0, e_min=12.0, mode="online")
    n = 8
    exposure = rng.random(n) * 4  # everyone short of e_min
    rel = rng.random(n)
    plan = repair_plan(solve(build_online_qp(exposure, rel, curve, config)), curve, config)
    quad = build_quadratic(exposure, rel)
    expected = marginal_fairness(quad, plan.delta_e) - 3.0 * plan.slack.sum()
    assert plan.objective_value == pytest.approx(expected, abs=1e-8)


def test_achieved_fairness_gain_nondecreasing_in_alpha():
    rng = np.random.default_rng(11)
    curve = ExaminationCurve.log_decay(5)
    for _ in range(5):
        n = 12
        exposure = rng.random(n) * 40
        rel = rng.random(n)
        quad = build_quadratic(exposure, rel)
        gains = []
        for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
            config = PlannerConfig(delta_t=8, alpha=alpha)
            plan = repair_plan(solve(build_post_qp(exposure, rel, curve, config)), curve, config)
            gains.append(marginal_fairness(quad, plan.delta_e))
        assert all(b >= a - 1e-6 for a, b in zip(gains, gains[1:]))


def test_online_with_satisfied_targets_matches_post_processing():
    # every item already has e_min exposure: slack stays zero and the plan
    # coincides with the post-processing solution
    rng = np.random.default_rng(12)
    curve = ExaminationCurve.log_decay(5)
    n = 10
    exposure = 20.0 + rng.random(n) * 5  # all above e_min = 10
    rel = rng.random(n)
    post = PlannerConfig(delta_t=6, alpha=0.5, mode="post_processing")
    online = PlannerConfig(delta_t=6, alpha=0.5, beta=1.0, e_min=10.0, mode="online")
    plan_post = repair_plan(solve(build_post_qp(exposure, rel, curve, post)), curve, post)
    plan_online = repair_plan(solve(build_online_qp(exposure, rel, curve, online)), curve, online)
    assert plan_online.slack == pytest.approx(np.zeros(n), abs=1e-7)
    assert plan_online.delta_e == pytest.approx(plan_post.delta_e, abs=1e-5)


def test_online_small_instance_against_grid_oracle():
    # n=2, k_s=1: the only freedom is how the budget splits between the items;
    # brute-force the split and compare objective values
    curve = ExaminationCurve.log_decay(1)
    config = PlannerConfig(delta_t=5, alpha=1.0, beta=100.0, e_min=10.0, mode="online")
    exposure = np.array([0.0, 20.0])
    rel = np.array([0.6, 0.5])
    plan = repair_plan(solve(build_online_qp(exposure, rel, curve, config)), curve, config)

    quad = build_quadratic(exposure, rel)
    budget = horizon_budget(2, curve, 5)

    def objective(x0):
        delta = np.array([x0, budget - x0])
        slack = np.maximum(config.e_min - exposure - delta, 0.0)
        return marginal_fairness(quad, delta) - config.beta * slack.sum()

    grid = np.linspace(0.0, 5.0, 200_001)
    best = max(objective(g) for g in grid)
    achieved = objective(plan.delta_e[0])
    assert achieved >= best - 1e-5
    # the huge slack penalty forces all exposure toward the starved item
    assert plan.delta_e[0] == pytest.approx(5.0, abs=1e-6)


def test_kkt_residuals_flag_bad_points():
    problem = unconstrained_problem(np.eye(2), np.array([-1.0, -1.0]), 2)
    bad = kkt_residuals(problem, np.array([5.0, 5.0]), np.zeros(2))
    assert bad["stationarity"] > 1e-3
