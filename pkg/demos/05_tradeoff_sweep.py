"""The fairness-effectiveness tradeoff frontier.

Sweeps the tradeoff parameter for the planning policy and prints the
(unfairness, cNDCG) pairs: as alpha grows the effectiveness requirement
relaxes, unfairness falls, and effectiveness pays for it. At alpha = 0 the
planner is pinned to the ideal exposure split; past the point where the
fairness optimum satisfies the effectiveness constraint on its own, the curve
flattens.
"""

import fairsim as fs

base = fs.SimulationConfig(
    dataset_ref=fs.SyntheticSpec(n_queries=20, docs_per_query=15, y_max=2, seed=0),
    policy=fs.PolicyConfig(
        kind="fara", alpha=1.0, planner=fs.PlannerConfig(delta_t=50, alpha=1.0)
    ),
    steps=20_000,
    seeds=(0, 1, 2),
)

alphas = [0.0, 0.125, 0.25, 0.375, 0.5, 0.75, 1.0]
print("alpha   unfairness     cNDCG@1   cNDCG@5")
for point in fs.sweep_alpha(base, alphas):
    if point.result is None:
        print(f"{point.alpha:5.3f}   failed: {point.error}")
        continue
    m = point.result.aggregate["means"]
    print(f"{point.alpha:5.3f} {m['unfairness']:12.2f} {m['cndcg'][1]:11.2f} "
          f"{m['cndcg'][5]:9.2f}")

print("\nwrite the same sweep to disk with the CLI:")
print("  fairsim sweep --alphas 0:1:0.25 --synthetic 20,15,2 --policy fara \\")
print("      --steps 20000 --seeds 0,1,2 --format csv --output sweep.csv")
