"""Feedback-based quantum optimization lab for MAX-CUT.

Builds layered circuits whose parameters come from measurements on the
current state instead of an outer classical optimizer, simulated exactly at
statevector level, plus the experiment harness for convergence, critical
time-interval, and circuit-depth scaling studies on 3-regular graphs.
"""
from .engine import (
    FeedbackScalars,
    apply_driver,
    apply_ud,
    apply_up,
    energy,
    feedback_scalars,
    init_plus_state,
    measure,
)
from .feedback import (
    BetaDecision,
    Branch,
    LawKind,
    beta_fo,
    beta_hybrid,
    beta_so,
    decide_beta,
    default_eps_b,
    quadratic_model,
)
from .problem import (
    DiagonalHamiltonian,
    Graph,
    GraphError,
    OptimumReport,
    ResourceLimitError,
    build_hp_diagonal,
    canonical_fingerprint,
    generate_random_regular,
    is_connected,
    read_edge_list,
    sample_graphs,
    solve_exact,
    write_edge_list,
)
from .runner import RunConfig, RunTrace, StepRecord, replay, run_falqon
from .experiments import (
    GW_RATIO,
    CriticalDt,
    EnsembleCurve,
    ScalingFit,
    ScalingStudy,
    appendix_study,
    ensemble_curve,
    ensemble_ratios,
    find_dt_c,
    is_monotone,
    layers_to_threshold,
    scaling_study,
)

__version__ = "0.1.0"
