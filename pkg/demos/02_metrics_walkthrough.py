"""Effectiveness and fairness bookkeeping on a toy query.

Shows the exposure ledger filling up over sessions, the discounted cum-NDCG
recurrence, the identity between exposure-derived aver-NDCG and per-session
averaging, and why proportional exposure means zero unfairness.
"""

import numpy as np

from fairsim import (
    ExaminationCurve,
    ExposureLedger,
    aver_ndcg_from_exposure,
    cum_ndcg_update,
    dcg_at,
    ideal_dcg,
    record_session,
    unfairness,
)

curve = ExaminationCurve.log_decay(3)
rel = np.array([0.9, 0.55, 0.2, 0.1])
ideal = ideal_dcg(rel, 3, curve)
print(f"four items with relevance {rel.tolist()}, ideal DCG@3 = {ideal:.4f}\n")

ledger = ExposureLedger(4, 3)
sessions = [np.array([0, 1, 2]), np.array([1, 0, 3]), np.array([0, 1, 2])]
state = 0.0
ratios = []
for t, ranklist in enumerate(sessions, start=1):
    dcg = dcg_at(ranklist, rel, 3, curve)
    state = cum_ndcg_update(state, dcg, ideal, gamma=0.995)
    ratios.append(dcg / ideal)
    record_session(ledger, ranklist, np.zeros(3), curve)
    print(f"session {t}: served {ranklist.tolist()}, DCG@3 = {dcg:.4f}, "
          f"cum-NDCG = {state:.4f}")

print("\nledger exposure at the full cutoff:", np.round(ledger.total_exposure, 4).tolist())

from_exposure = aver_ndcg_from_exposure(ledger.exposure_at(3), rel, ideal, len(sessions))
print(f"aver-NDCG from exposure: {from_exposure:.6f}")
print(f"mean of per-session ratios: {np.mean(ratios):.6f}  (identical by identity)\n")

print("unfairness is zero exactly when exposure is proportional to relevance:")
print(f"  proportional: {unfairness(7.3 * rel, rel):.2e}")
print(f"  all exposure on one item: {unfairness(np.array([3.0, 0, 0, 0]), rel):.4f}")
print(f"  ledger after the three sessions above: "
      f"{unfairness(ledger.total_exposure, rel):.4f}")
