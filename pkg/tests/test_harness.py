"""Tests for the simulation driver, sweeps, and result emission."""

import csv
import dataclasses
import json

import numpy as np
import pytest

from fairsim.harness import (
    SimulationConfig,
    SyntheticSpec,
    emit_results,
    load_dataset,
    run_simulation,
    sweep_alpha,
)
from fairsim.metrics import MetricConfig
from fairsim.policies import PolicyConfig
from fairsim.qp import PlannerConfig
from fairsim.user_model import ExaminationCurve


def make_config(kind="topk", steps=50, seeds=(0,), k_s=3, setting="post_processing",
                alpha=1.0, dataset=None, **kw):
    planner = PlannerConfig(delta_t=4, alpha=min(alpha, 1.0), mode=setting)
    policy = PolicyConfig(
        kind=kind, setting=setting, alpha=alpha, planner=planner,
        curve=ExaminationCurve.log_decay(k_s),
    )
    metric = MetricConfig(cutoffs=tuple(c for c in (1, 3, 5) if c <= k_s), k_s=k_s)
    return SimulationConfig(
        dataset_ref=dataset if dataset is not None else SyntheticSpec(8, 6, 2),
        policy=policy,
        steps=steps,
        seeds=seeds,
        metric=metric,
        **kw,
    )


def seed_fields(seed_result):
    return (seed_result.cndcg, seed_result.unfairness, seed_result.estimator_mae)


def test_single_step_topk_gives_single_session_ratio():
    result = run_simulation(make_config(steps=1))
    # one served query, perfect ranking in the post setting: its cum-NDCG is
    # exactly 1; every other test query still sits at 0
    values = result.per_seed[0].cndcg
    n_test = len(load_dataset(SyntheticSpec(8, 6, 2)).partition_ids("test"))
    for kc, value in values.items():
        assert value == pytest.approx(1.0 / n_test) or value == pytest.approx(0.0)


def test_identical_config_and_seed_reproduce_bitwise():
    a = run_simulation(make_config(kind="fara", steps=300, seeds=(3,)))
    b = run_simulation(make_config(kind="fara", steps=300, seeds=(3,)))
    assert seed_fields(a.per_seed[0]) == seed_fields(b.per_seed[0])


def test_seed_isolation():
    both = run_simulation(make_config(steps=200, seeds=(0, 1)))
    alone = run_simulation(make_config(steps=200, seeds=(1,)))
    assert seed_fields(both.per_seed[1]) == seed_fields(alone.per_seed[0])


def test_aggregate_consistent_with_per_seed():
    result = run_simulation(make_config(steps=120, seeds=(0, 1, 2)))
    unf = [s.unfairness for s in result.per_seed]
    assert result.aggregate["means"]["unfairness"] == pytest.approx(np.mean(unf))
    assert result.aggregate["stddevs"]["unfairness"] == pytest.approx(np.std(unf))
    for kc in result.per_seed[0].cndcg:
        vals = [s.cndcg[kc] for s in result.per_seed]
        assert result.aggregate["means"]["cndcg"][kc] == pytest.approx(np.mean(vals))


def test_empty_partition_errors_before_any_step():
    letor = "1 qid:a 1:0.5\n2 qid:b 1:0.5\n"  # two queries: train + test only
    with pytest.raises(ValueError):
        run_simulation(make_config(dataset=write_letor(letor), partition="valid"))


def write_letor(text, path="/tmp/fairsim_test_dataset.txt"):
    with open(path, "w") as fh:
        fh.write(text)
    return path


def test_zero_ideal_test_queries_are_skipped_but_counted(tmp_path):
    # second query (the test-partition one) has all-zero grades; with a zero
    # click-noise floor its ideal DCG is zero
    letor = "2 qid:a 1:0.5\n1 qid:a 1:0.1\n0 qid:b 1:0.5\n0 qid:b 1:0.1\n"
    path = tmp_path / "zero.txt"
    path.write_text(letor)
    config = make_config(dataset=str(path), partition="test", steps=30, epsilon=0.0, k_s=3)
    result = run_simulation(config)
    assert result.skipped_zero_ideal_queries == 1
    assert result.per_seed[0].cndcg[1] == 0.0  # no evaluated queries remain
    assert result.per_seed[0].unfairness == 0.0  # zero relevance: no disparity


def test_incremental_cndcg_matches_from_scratch_recomputation():
    config = make_config(kind="fara", steps=400, seeds=(0,), log_trajectory=True)
    result = run_simulation(config)
    gamma = config.metric.gamma
    traj = result.per_seed[0].trajectory
    # recompute every per-query discounted sum from the logged session ratios
    checked = 0
    for qid, ratios in traj["ratios"].items():
        for j in range(len(traj["cutoffs"])):
            scratch = sum(
                r[j] * gamma ** (len(ratios) - 1 - i) for i, r in enumerate(ratios)
            )
            assert scratch == pytest.approx(traj["final_cndcg"][qid][j], abs=1e-9)
            checked += 1
    assert checked > 0


def test_exposure_conservation_across_run():
    config = make_config(kind="randomk", steps=800, seeds=(0,))
    result = run_simulation(config)
    assert abs(result.per_seed[0].conservation_gap) < 1e-6


def test_sweep_singleton_matches_run():
    base = make_config(kind="fara", steps=150, seeds=(0,))
    points = sweep_alpha(base, [1.0])
    direct = run_simulation(base)
    assert len(points) == 1
    assert seed_fields(points[0].result.per_seed[0]) == seed_fields(direct.per_seed[0])


def test_sweep_continues_past_failing_point():
    base = make_config(kind="fara", steps=60, seeds=(0,))
    points = sweep_alpha(base, [0.5, 7.0, 1.0])  # 7.0 is out of range for the planner
    assert points[0].result is not None
    assert points[1].result is None and points[1].error
    assert points[2].result is not None


def test_emit_json_round_trip(tmp_path):
    result = run_simulation(make_config(steps=40, seeds=(0, 1)))
    path = tmp_path / "out.json"
    emit_results(result, str(path), format="json")
    loaded = json.loads(path.read_text())
    assert loaded["schema_version"] == 1
    assert len(loaded["per_seed"]) == 2
    rec = loaded["per_seed"][0]
    assert rec["seed"] == 0
    assert rec["unfairness"] == result.per_seed[0].unfairness
    assert rec["cndcg"]["1"] == result.per_seed[0].cndcg[1]
    assert loaded["aggregate"]["means"]["unfairness"] == pytest.approx(
        result.aggregate["means"]["unfairness"]
    )
    assert loaded["skipped_zero_ideal_queries"] == result.skipped_zero_ideal_queries
    assert loaded["config"]["epsilon"] == 0.1


def test_emit_csv_rows_and_aggregates(tmp_path):
    base = make_config(kind="topk", steps=40, seeds=(0, 1))
    points = sweep_alpha(base, [0.0, 1.0])
    path = tmp_path / "out.csv"
    emit_results(points, str(path), format="csv")
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    seed_rows = [r for r in rows if r["row_kind"] == "seed"]
    mean_rows = [r for r in rows if r["row_kind"] == "mean"]
    std_rows = [r for r in rows if r["row_kind"] == "stddev"]
    assert len(seed_rows) == 4  # 2 alphas x 2 seeds
    assert len(mean_rows) == 2 and len(std_rows) == 2
    assert float(seed_rows[0]["cndcg_at_1"]) == points[0].result.per_seed[0].cndcg[1]


def test_emit_empty_sweep_is_valid(tmp_path):
    json_path = tmp_path / "empty.json"
    emit_results([], str(json_path), format="json")
    assert json.loads(json_path.read_text()) == {"schema_version": 1, "sweep": []}
    csv_path = tmp_path / "empty.csv"
    emit_results([], str(csv_path), format="csv")
    header = csv_path.read_text().strip().splitlines()
    assert len(header) == 1 and header[0].startswith("row_kind,")


def test_emit_io_failure_carries_path():
    result = run_simulation(make_config(steps=20))
    with pytest.raises(RuntimeError, match="/nonexistent"):
        emit_results(result, "/nonexistent/dir/out.json", format="json")


def test_config_validation():
    with pytest.raises(ValueError):
        make_config(steps=0)
    with pytest.raises(ValueError):
        make_config(seeds=())
    with pytest.raises(ValueError):
        dataclasses.replace(make_config(), metric=MetricConfig(k_s=4, cutoffs=(1,)))
