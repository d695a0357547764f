"""Preallocation-based combinatorial-auction channel assignment toolkit."""

from .auction import (
    Bid,
    BidMatrix,
    RcaConfig,
    RcaInfeasible,
    WdpSolution,
    brute_force_wdp,
    generate_bs_bids,
    generate_channel_bids,
    rca_to_preallocation,
    solve_ca,
    solve_rca,
)
from .connectivity import (
    CapacityProfile,
    ConnectivityEvaluator,
    LinkModel,
    connectivity,
    mean_snr,
    single_connectivity_value,
    utility,
)
from .harness import (
    ExperimentSpec,
    MethodSpec,
    SummaryStats,
    run_comparison,
    run_sweep,
    summarize,
)
from .matching import (
    PreferenceProfile,
    Quotas,
    build_preferences,
    m2m_gale_shapley,
    verify_pairwise_stability,
)
from .pipeline import AllocationResult, Metrics, allocate, compute_metrics
from .prealloc import (
    Preallocation,
    dbsr,
    distance_based,
    random_prealloc,
    scvb,
    scvbsr,
)
from .scenario import (
    LS,
    MS,
    SS,
    Scenario,
    SetupClass,
    distance,
    generate_scenario,
    setup_class,
)

__version__ = "0.1.0"
