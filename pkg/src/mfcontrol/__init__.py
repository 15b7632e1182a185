"""Weak-solution mean-field control on a single reference ensemble.

Controlled McKean-Vlasov dynamics are represented by Girsanov reweightings of
one driftless simulation: measure flows are weight columns, payoffs are
weighted averages, optimization is Hamiltonian minimization inside a backward
regression solve, and every comparison between controls happens on common
paths.  Nothing is ever resimulated for a new control.
"""

__version__ = "0.1.0"

from .core import (
    BrownianEnsemble,
    PathEnsemble,
    TimeGrid,
    ensemble_moments,
    make_time_grid,
    path_statistic,
    sample_brownian,
    simulate_for_scenario,
    simulate_reference,
)
from .scenario import (
    ActionGrid,
    AssumptionStatus,
    ConfigError,
    CostSpec,
    DiffusionSpec,
    DriftSpec,
    GameCostSpec,
    GameDriftSpec,
    GameScenario,
    Scenario,
    SingularDiffusionError,
    StatisticSpec,
    StateTermSpec,
    TerminalSpec,
    UnknownScenarioError,
    ValidationBlockedError,
    ValidationReport,
    assert_runnable,
    builtin_config,
    builtin_scenarios,
    get_builtin,
    parse_scenario,
    serialize_scenario,
    validate_scenario,
)
from .measure import (
    EnsembleMismatchError,
    MeasureFlow,
    TVEstimate,
    hellinger_bound,
    reference_flow,
    tv_marginal,
    tv_pathspace,
    weighted_statistic,
)
from .girsanov import (
    ContractionReport,
    DensityProcess,
    FixpointConvergenceError,
    FixpointDiagnostics,
    FixpointResult,
    contraction_report,
    density_process,
    drift_evaluator,
    fixpoint_measure_flow,
    reweighted_expectation,
)
from .bsde import (
    BasisSpec,
    BsdeSolution,
    RankDeficientError,
    build_features,
    regress_conditional,
    solve_driver_bsde,
    solve_linear_bsde,
    terminal_values,
)
from .control import (
    BsdeFeedbackControl,
    ComparisonReport,
    Control,
    OptimizationReport,
    PayoffResult,
    SearchReport,
    constant_control,
    ekeland_distance,
    envelope_bsde,
    evaluate_payoff,
    hamiltonian,
    minimized_hamiltonian,
    near_optimal_search,
    parametric_control,
    parse_control,
    policy_iteration,
    table_control,
    verify_comparison,
)
from .game import (
    EnvelopeValues,
    IsaacsError,
    IsaacsReport,
    PairFeedbackControl,
    SaddleCheckReport,
    SaddleReport,
    envelopes,
    game_hamiltonian,
    isaacs_gap,
    solve_game,
    verify_saddle,
)
from .verify import AcceptanceContext, CheckResult, run_battery
from .cli import main

__all__ = [
    "__version__",
    # core
    "BrownianEnsemble", "PathEnsemble", "TimeGrid", "ensemble_moments",
    "make_time_grid", "path_statistic", "sample_brownian",
    "simulate_for_scenario", "simulate_reference",
    # scenario registry
    "ActionGrid", "AssumptionStatus", "ConfigError", "CostSpec",
    "DiffusionSpec", "DriftSpec", "GameCostSpec", "GameDriftSpec",
    "GameScenario", "Scenario", "SingularDiffusionError", "StatisticSpec",
    "StateTermSpec", "TerminalSpec", "UnknownScenarioError",
    "ValidationBlockedError", "ValidationReport", "assert_runnable",
    "builtin_config", "builtin_scenarios", "get_builtin", "parse_scenario",
    "serialize_scenario", "validate_scenario",
    # measures
    "EnsembleMismatchError", "MeasureFlow", "TVEstimate", "hellinger_bound",
    "reference_flow", "tv_marginal", "tv_pathspace", "weighted_statistic",
    # densities and fixed points
    "ContractionReport", "DensityProcess", "FixpointConvergenceError",
    "FixpointDiagnostics", "FixpointResult", "contraction_report",
    "density_process", "drift_evaluator", "fixpoint_measure_flow",
    "reweighted_expectation",
    # backward solver
    "BasisSpec", "BsdeSolution", "RankDeficientError", "build_features",
    "regress_conditional", "solve_driver_bsde", "solve_linear_bsde",
    "terminal_values",
    # control
    "BsdeFeedbackControl", "ComparisonReport", "Control",
    "OptimizationReport", "PayoffResult", "SearchReport", "constant_control",
    "ekeland_distance", "envelope_bsde", "evaluate_payoff", "hamiltonian",
    "minimized_hamiltonian", "near_optimal_search", "parametric_control",
    "parse_control", "policy_iteration", "table_control", "verify_comparison",
    # games
    "EnvelopeValues", "IsaacsError", "IsaacsReport", "PairFeedbackControl",
    "SaddleCheckReport", "SaddleReport", "envelopes", "game_hamiltonian",
    "isaacs_gap", "solve_game", "verify_saddle",
    # acceptance battery and CLI
    "AcceptanceContext", "CheckResult", "run_battery", "main",
]
