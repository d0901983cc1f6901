"""End-to-end simulation driver, tradeoff sweeps, and result emission.

One run: sample a query uniformly from the configured partition each step,
ask the policy for a ranklist, draw biased clicks, fold the session into the
query's ledger and estimator, and keep the per-query discounted NDCG states
rolling. Effectiveness is reported as the mean final cum-NDCG over test
queries with positive ideal DCG; unfairness is the end-of-run pairwise
disparity under true relevance, averaged uniformly over all test queries.

Each seed gets three spawned random streams (query sampling, clicks, policy
randomness) so per-seed results are independent of how many seeds run and in
what order, and runs are bit-reproducible.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import Dataset, generate_synthetic, parse_letor
from .metrics import (
    ExposureLedger,
    MetricConfig,
    cum_ndcg_update,
    ideal_dcg,
    record_session,
    unfairness,
)
from .policies import (
    PLANNING_KINDS,
    PolicyConfig,
    QueryState,
    estimate_relevance_all,
    next_ranklist,
)
from .qp import PlannerConfig
from .user_model import ExaminationCurve, RelevanceModel, relevance_probs, simulate_clicks

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters for an on-the-fly synthetic dataset (seed fixed so every
    run seed and sweep point sees the identical dataset)."""

    n_queries: int
    docs_per_query: int
    y_max: int
    seed: int = 0


@dataclass(frozen=True)
class SimulationConfig:
    dataset_ref: str | SyntheticSpec
    policy: PolicyConfig
    steps: int
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    partition: str = "test"
    metric: MetricConfig = field(default_factory=MetricConfig)
    epsilon: float = 0.1
    output_path: str | None = None
    log_trajectory: bool = False

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if self.policy.curve.k_s != self.metric.k_s:
            raise ValueError(
                f"policy curve k_s {self.policy.curve.k_s} != metric k_s {self.metric.k_s}"
            )


@dataclass
class SeedResult:
    seed: int
    cndcg: dict[int, float]
    unfairness: float
    wall_time_s: float
    estimator_mae: float
    conservation_gap: float = 0.0
    trajectory: dict | None = None


@dataclass
class RunResult:
    config: dict
    per_seed: list[SeedResult]
    aggregate: dict
    skipped_zero_ideal_queries: int


@dataclass
class SweepPoint:
    alpha: float
    result: RunResult | None = None
    error: str | None = None


def load_dataset(dataset_ref: str | SyntheticSpec) -> Dataset:
    if isinstance(dataset_ref, SyntheticSpec):
        return generate_synthetic(
            dataset_ref.n_queries,
            dataset_ref.docs_per_query,
            dataset_ref.y_max,
            dataset_ref.seed,
        )
    with open(dataset_ref, "rb") as fh:
        return parse_letor(fh, name=str(dataset_ref))


def config_echo(config: SimulationConfig, dataset: Dataset) -> dict:
    """JSON-safe echo of the full configuration plus protocol notes."""
    policy = config.policy
    return {
        "dataset": dataset.name,
        "y_max": dataset.y_max,
        "partition": config.partition,
        "steps": config.steps,
        "seeds": list(config.seeds),
        "epsilon": config.epsilon,
        "policy": {
            "kind": policy.kind,
            "setting": policy.setting,
            "alpha": policy.alpha,
            "delta_t": policy.planner.delta_t,
            "beta": policy.planner.beta,
            "e_min": policy.planner.e_min,
        },
        "metric": {
            "gamma": config.metric.gamma,
            "cutoffs": list(config.metric.cutoffs),
            "k_s": config.metric.k_s,
        },
        "notes": {
            "query_sampling": "uniform over the configured partition",
            "evaluation_partition": "test",
            "unfairness_aggregation": "uniform mean over test queries, end of run",
        },
    }


class _QueryRuntime:
    """Precomputed per-query arrays plus the mutable serving state."""

    __slots__ = ("relevance", "ideals", "state", "cndcg", "ratio_log")

    def __init__(self, query, model: RelevanceModel, curve: ExaminationCurve, cutoffs):
        self.relevance = relevance_probs(query.grades(), model)
        self.ideals = np.array([ideal_dcg(self.relevance, kc, curve) for kc in cutoffs])
        ledger = ExposureLedger(len(self.relevance), curve.k_s)
        self.state = QueryState(
            ledger=ledger,
            true_relevance=self.relevance,
            relevance_est=np.zeros(len(self.relevance)),
        )
        self.cndcg = np.zeros(len(cutoffs))
        self.ratio_log: list[np.ndarray] | None = None


def _run_one_seed(
    dataset: Dataset,
    config: SimulationConfig,
    seed: int,
) -> SeedResult:
    curve = config.policy.curve
    metric = config.metric
    model = RelevanceModel(y_max=dataset.y_max, epsilon=config.epsilon)
    cutoffs = metric.cutoffs
    rng_query, rng_click, rng_policy = np.random.default_rng(seed).spawn(3)

    qids = list(dataset.queries)
    runtimes = {
        qid: _QueryRuntime(dataset.queries[qid], model, curve, cutoffs) for qid in qids
    }
    if config.log_trajectory:
        for rt in runtimes.values():
            rt.ratio_log = []
    sample_ids = dataset.partition_ids(config.partition)
    if not sample_ids:
        raise ValueError(f"partition {config.partition!r} of {dataset.name} is empty")
    test_ids = dataset.partition_ids("test")

    started = time.perf_counter()
    n_sample = len(sample_ids)
    for _ in range(config.steps):
        qid = sample_ids[int(rng_query.integers(n_sample))]
        rt = runtimes[qid]
        ranklist = next_ranklist(rt.state, config.policy, rng_policy)
        length = len(ranklist)
        weights = curve.probs[:length]
        clicked = simulate_clicks(ranklist, rt.relevance, curve, rng_click)
        record_session(rt.state.ledger, ranklist, clicked, curve)
        rt.state.relevance_est = estimate_relevance_all(rt.state.ledger)
        gains = np.cumsum(rt.relevance[ranklist] * weights)
        ratios = np.empty(len(cutoffs))
        for j, kc in enumerate(cutoffs):
            if rt.ideals[j] <= 0.0:
                ratios[j] = 0.0
                continue
            dcg = float(gains[min(kc, length) - 1])
            ratios[j] = dcg / rt.ideals[j]
            rt.cndcg[j] = cum_ndcg_update(rt.cndcg[j], dcg, rt.ideals[j], metric.gamma)
        if rt.ratio_log is not None:
            rt.ratio_log.append(ratios)
    wall = time.perf_counter() - started

    evaluated = [qid for qid in test_ids if runtimes[qid].ideals[0] > 0.0]
    cndcg = {}
    for j, kc in enumerate(cutoffs):
        values = [runtimes[qid].cndcg[j] for qid in evaluated]
        cndcg[kc] = float(np.mean(values)) if values else 0.0
    unfair_values = [
        unfairness(runtimes[qid].state.ledger.total_exposure, runtimes[qid].relevance)
        for qid in test_ids
    ]
    mae_values = [
        float(np.mean(np.abs(runtimes[qid].state.relevance_est - runtimes[qid].relevance)))
        for qid in test_ids
    ]
    # recorded exposure mass must equal what the served sessions emitted
    expected_mass = sum(
        rt.state.ledger.sessions_served
        * float(curve.probs[: min(curve.k_s, rt.state.n)].sum())
        for rt in runtimes.values()
    )
    actual_mass = sum(
        float(rt.state.ledger.total_exposure.sum()) for rt in runtimes.values()
    )
    trajectory = None
    if config.log_trajectory:
        trajectory = {
            "cutoffs": list(cutoffs),
            "ratios": {qid: [r.tolist() for r in runtimes[qid].ratio_log] for qid in qids},
            "final_cndcg": {qid: runtimes[qid].cndcg.tolist() for qid in qids},
        }
    return SeedResult(
        seed=seed,
        cndcg=cndcg,
        unfairness=float(np.mean(unfair_values)) if unfair_values else 0.0,
        wall_time_s=wall,
        estimator_mae=float(np.mean(mae_values)) if mae_values else 0.0,
        conservation_gap=actual_mass - expected_mass,
        trajectory=trajectory,
    )


def _aggregate(per_seed: list[SeedResult], cutoffs) -> dict:
    def stats(values):
        arr = np.asarray(values, dtype=float)
        return float(arr.mean()), float(arr.std())

    means: dict = {"cndcg": {}, "unfairness": None, "estimator_mae": None}
    stds: dict = {"cndcg": {}, "unfairness": None, "estimator_mae": None}
    for kc in cutoffs:
        means["cndcg"][kc], stds["cndcg"][kc] = stats([s.cndcg[kc] for s in per_seed])
    means["unfairness"], stds["unfairness"] = stats([s.unfairness for s in per_seed])
    means["estimator_mae"], stds["estimator_mae"] = stats(
        [s.estimator_mae for s in per_seed]
    )
    return {"means": means, "stddevs": stds}


def run_simulation(config: SimulationConfig) -> RunResult:
    """Run every configured seed and aggregate the results.

    Deterministic per (config, seed); the dataset is loaded once and shared
    read-only across seeds. Queries whose ideal DCG is zero are excluded from
    effectiveness averaging (counted in the result) but kept in fairness."""
    dataset = load_dataset(config.dataset_ref)
    sample_ids = dataset.partition_ids(config.partition)
    if not dataset.queries or not sample_ids:
        raise ValueError(
            f"dataset {dataset.name} has no queries in partition {config.partition!r}"
        )
    model = RelevanceModel(y_max=dataset.y_max, epsilon=config.epsilon)
    skipped = 0
    for qid in dataset.partition_ids("test"):
        rel = relevance_probs(dataset.queries[qid].grades(), model)
        if ideal_dcg(rel, config.metric.cutoffs[0], config.policy.curve) <= 0.0:
            skipped += 1
    per_seed = [_run_one_seed(dataset, config, seed) for seed in config.seeds]
    return RunResult(
        config=config_echo(config, dataset),
        per_seed=per_seed,
        aggregate=_aggregate(per_seed, config.metric.cutoffs),
        skipped_zero_ideal_queries=skipped,
    )


def sweep_alpha(base: SimulationConfig, alphas) -> list[SweepPoint]:
    """Run one independent simulation per tradeoff value, sharing the seeds.

    Per-point failures are captured on the point and the sweep continues."""
    points = []
    for alpha in alphas:
        try:
            policy = replace(
                base.policy,
                alpha=float(alpha),
                planner=replace(base.policy.planner, alpha=float(alpha))
                if base.policy.kind in PLANNING_KINDS
                else base.policy.planner,
            )
            result = run_simulation(replace(base, policy=policy))
            points.append(SweepPoint(alpha=float(alpha), result=result))
        except Exception as exc:  # noqa: BLE001 - per-point isolation is the contract
            points.append(SweepPoint(alpha=float(alpha), error=str(exc)))
    return points


def _seed_record(seed_result: SeedResult) -> dict:
    return {
        "seed": seed_result.seed,
        "cndcg": {str(k): v for k, v in seed_result.cndcg.items()},
        "unfairness": seed_result.unfairness,
        "wall_time_s": seed_result.wall_time_s,
    }


def _run_document(result: RunResult) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "config": result.config,
        "per_seed": [_seed_record(s) for s in result.per_seed],
        "aggregate": {
            "means": _jsonify(result.aggregate["means"]),
            "stddevs": _jsonify(result.aggregate["stddevs"]),
        },
        "skipped_zero_ideal_queries": result.skipped_zero_ideal_queries,
    }


def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def _csv_rows(results: list[SweepPoint]) -> list[dict]:
    cutoffs = (1, 3, 5)
    rows = []
    for point in results:
        if point.result is None:
            rows.append(
                {"row_kind": "error", "alpha": point.alpha, "seed": "", "error": point.error}
            )
            continue
        for s in point.result.per_seed:
            row = {"row_kind": "seed", "alpha": point.alpha, "seed": s.seed, "error": ""}
            for kc in cutoffs:
                row[f"cndcg_at_{kc}"] = s.cndcg.get(kc, "")
            row["unfairness"] = s.unfairness
            row["wall_time_s"] = s.wall_time_s
            rows.append(row)
        agg = point.result.aggregate
        for kind in ("mean", "stddev"):
            block = agg["means"] if kind == "mean" else agg["stddevs"]
            row = {"row_kind": kind, "alpha": point.alpha, "seed": "", "error": ""}
            for kc in cutoffs:
                row[f"cndcg_at_{kc}"] = block["cndcg"].get(kc, "")
            row["unfairness"] = block["unfairness"]
            row["wall_time_s"] = ""
            rows.append(row)
    return rows


CSV_FIELDS = [
    "row_kind",
    "alpha",
    "seed",
    "cndcg_at_1",
    "cndcg_at_3",
    "cndcg_at_5",
    "unfairness",
    "wall_time_s",
    "error",
]


def emit_results(
    results: RunResult | list[SweepPoint],
    path: str,
    format: str = "json",
) -> None:
    """Write results to path as JSON (schema-versioned document) or CSV
    (one row per seed plus aggregate rows tagged by row_kind)."""
    if format not in ("json", "csv"):
        raise ValueError(f"unknown format {format!r}")
    if isinstance(results, RunResult):
        points = [SweepPoint(alpha=results.config["policy"]["alpha"], result=results)]
        document = _run_document(results)
    else:
        points = results
        document = {
            "schema_version": SCHEMA_VERSION,
            "sweep": [
                {"alpha": p.alpha, "error": p.error}
                if p.result is None
                else {"alpha": p.alpha, **_run_document(p.result)}
                for p in points
            ],
        }
    try:
        if format == "json":
            payload = json.dumps(document, indent=2)
        else:
            buf = io.StringIO()
            writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS)
            writer.writeheader()
            for row in _csv_rows(points):
                writer.writerow(row)
            payload = buf.getvalue()
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(payload)
    except OSError as exc:
        raise RuntimeError(f"failed to write results to {path}: {exc}") from exc
