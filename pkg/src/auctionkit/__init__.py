"""Position-auction toolkit: clearing, autobidder dynamics, dominance
checks, and welfare/revenue guarantee verification."""

from .types import (
    AgentState,
    AuctionFormat,
    BidProfile,
    MechanismConfig,
    Outcome,
    ProblemInstance,
    SignalConfig,
    SignalKind,
    dumps,
    load_json,
    save_json,
    validate_instance,
)
from .agents import (
    DynamicsConfig,
    Trajectory,
    best_response_uniform,
    objective,
    response_grid,
    ros_satisfied,
    run_dynamics,
    step_multipliers,
    uniform_bids,
)
from .bounds import (
    COROLLARIES,
    BoundReport,
    CorollarySpec,
    LemmaParams,
    OverlapPartition,
    PreconditionCheck,
    PreconditionReport,
    TightInstance,
    assert_corollary,
    check_lemma1_preconditions,
    lemma1_bounds,
    overlap_partition,
    sample_signals,
    tight_instance,
)
from .clearing import (
    RankedAuctionView,
    clear,
    clear_batch,
    opt_welfare,
    rank_auctions,
    revenue,
    revenue_per_bidder,
    top_value_bidders,
    welfare,
    welfare_per_bidder,
)
from .dominance import (
    BidGrid,
    DominanceVerdict,
    LemmaCheckReport,
    UndominatedResult,
    build_closure_grid,
    dominates,
    evaluate_profiles,
    is_undominated,
    run_lemma_check,
    undominated_set,
    verify_bid_lower_bounds,
)
from .experiments import (
    GeneratorSpec,
    LiftReport,
    TreatmentResult,
    TreatmentSpec,
    emit_plot_data,
    generate_instance,
    run_experiment,
    sample_treatment_signals,
    treatment_bound,
)

__all__ = [
    "AgentState",
    "AuctionFormat",
    "BidGrid",
    "BidProfile",
    "BoundReport",
    "COROLLARIES",
    "CorollarySpec",
    "DominanceVerdict",
    "DynamicsConfig",
    "GeneratorSpec",
    "LemmaCheckReport",
    "LemmaParams",
    "LiftReport",
    "MechanismConfig",
    "Outcome",
    "OverlapPartition",
    "PreconditionCheck",
    "PreconditionReport",
    "ProblemInstance",
    "RankedAuctionView",
    "SignalConfig",
    "SignalKind",
    "TightInstance",
    "Trajectory",
    "TreatmentResult",
    "TreatmentSpec",
    "UndominatedResult",
    "assert_corollary",
    "best_response_uniform",
    "build_closure_grid",
    "check_lemma1_preconditions",
    "clear",
    "clear_batch",
    "dominates",
    "dumps",
    "emit_plot_data",
    "evaluate_profiles",
    "generate_instance",
    "is_undominated",
    "lemma1_bounds",
    "load_json",
    "objective",
    "opt_welfare",
    "overlap_partition",
    "rank_auctions",
    "response_grid",
    "revenue",
    "revenue_per_bidder",
    "ros_satisfied",
    "run_dynamics",
    "run_experiment",
    "run_lemma_check",
    "sample_signals",
    "save_json",
    "step_multipliers",
    "tight_instance",
    "top_value_bidders",
    "undominated_set",
    "uniform_bids",
    "validate_instance",
    "verify_bid_lower_bounds",
    "welfare",
    "welfare_per_bidder",
]

__version__ = "0.1.0"
