"""fairsim: an exposure-fair ranking simulation laboratory.

Plan-ahead fair ranking (quadratic-program exposure planning plus vertical
ranklist allocation), greedy baselines, biased-click user simulation,
exposure-fairness metrics, and a multi-seed experiment harness.
"""

from .allocation import (
    AllocationResiduals,
    RanklistBuffer,
    allocation_residuals,
    horizontal_allocate,
    vertical_allocate,
)
from .dataset import (
    Dataset,
    ItemRecord,
    LetorParseError,
    QueryInstance,
    dump_letor,
    generate_synthetic,
    parse_letor,
)
from .fairness import FairnessQuadratic, build_quadratic, marginal_fairness
from .harness import (
    RunResult,
    SeedResult,
    SimulationConfig,
    SweepPoint,
    SyntheticSpec,
    emit_results,
    run_simulation,
    sweep_alpha,
)
from .metrics import (
    ExposureLedger,
    MetricConfig,
    aver_ndcg_from_exposure,
    cum_ndcg_update,
    dcg_at,
    ideal_dcg,
    record_session,
    unfairness,
)
from .policies import (
    PolicyConfig,
    QueryState,
    estimate_relevance,
    estimate_relevance_all,
    fairco_next,
    fara_next,
    mcfair_next,
    next_ranklist,
    randomk_next,
    topk_next,
)
from .qp import (
    ExposurePlan,
    PlannerConfig,
    QpProblem,
    QpSolution,
    QpSolverError,
    build_online_qp,
    build_post_qp,
    ideal_topk_plan,
    repair_plan,
    solve,
)
from .user_model import (
    ExaminationCurve,
    RelevanceModel,
    examination_prob,
    relevance_prob,
    relevance_probs,
    simulate_clicks,
)

__version__ = "0.1.0"
