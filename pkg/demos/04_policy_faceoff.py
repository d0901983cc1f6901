"""All six serving policies on one synthetic workload.

Runs a short post-processing simulation per policy on the same dataset and
seeds, then prints effectiveness at three cutoffs next to end-of-run
unfairness. Expect the relevance sort to top effectiveness while concentrating
exposure, the random baseline to do the opposite, and the planning policies to
hold top-rank effectiveness at a fraction of the unfairness.
"""

import fairsim as fs

STEPS = 20_000
SEEDS = (0, 1, 2)
DATASET = fs.SyntheticSpec(n_queries=20, docs_per_query=15, y_max=2, seed=0)

POLICIES = [
    ("topk", 0.0),
    ("randomk", 0.0),
    ("fairco", 1000.0),
    ("mcfair", 1000.0),
    ("fara_horiz", 1.0),
    ("fara", 1.0),
]

print(f"{STEPS} sessions over {DATASET.n_queries} queries, "
      f"{len(SEEDS)} seeds, post-processing setting\n")
header = f"{'policy':12s} {'alpha':>7s} {'cNDCG@1':>9s} {'cNDCG@3':>9s} {'cNDCG@5':>9s} {'unfairness':>12s}"
print(header)
print("-" * len(header))
for kind, alpha in POLICIES:
    planner = fs.PlannerConfig(delta_t=50, alpha=min(alpha, 1.0))
    config = fs.SimulationConfig(
        dataset_ref=DATASET,
        policy=fs.PolicyConfig(kind=kind, alpha=alpha, planner=planner),
        steps=STEPS,
        seeds=SEEDS,
    )
    means = fs.run_simulation(config).aggregate["means"]
    print(f"{kind:12s} {alpha:7.1f} {means['cndcg'][1]:9.2f} {means['cndcg'][3]:9.2f} "
          f"{means['cndcg'][5]:9.2f} {means['unfairness']:12.2f}")
