"""How simulated users examine and click.

Walks through the examination curve (position bias with a hard cutoff), the
grade-to-relevance mapping, and click sampling, then verifies empirically that
click rates factor into examination times relevance.
"""

import numpy as np

from fairsim import ExaminationCurve, RelevanceModel, relevance_probs, simulate_clicks

curve = ExaminationCurve.log_decay(5)
print("examination probability by rank (cutoff k_s = 5):")
for rank in range(1, 8):
    print(f"  rank {rank}: {curve.prob_at(rank):.4f}")
print("ranks past the cutoff are never examined.\n")

model = RelevanceModel(y_max=2, epsilon=0.1)
grades = np.array([0, 1, 2])
rel = relevance_probs(grades, model)
print("grade -> relevance probability (noise floor epsilon = 0.1):")
for g, r in zip(grades, rel):
    print(f"  grade {g}: {r:.2f}")
print()

# five items, graded 2,1,0,2,1, served in canonical order
rel = relevance_probs(np.array([2, 1, 0, 2, 1]), model)
ranklist = np.arange(5)
rng = np.random.default_rng(0)
print("one simulated session:", simulate_clicks(ranklist, rel, curve, rng).tolist())

draws = 200_000
clicks = np.zeros(5)
for _ in range(draws):
    clicks += simulate_clicks(ranklist, rel, curve, rng)
print(f"\nempirical click rate over {draws} sessions vs examination x relevance:")
for i in range(5):
    expected = curve.probs[i] * rel[i]
    print(f"  rank {i + 1}: {clicks[i] / draws:.4f}  (expected {expected:.4f})")
