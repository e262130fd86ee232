"""Minimum-cost query planning for classification with noisy models."""

from .bounds import (
    affinity,
    is_surrogate_feasible,
    log_affinity,
    optimize_tilt,
    ordered_pairs,
    surrogate_error,
    SurrogateReport,
)
from .exact import (
    EnumerationBudgetError,
    ExactErrorResult,
    exact_error,
    exact_error_table,
    exact_opt,
    exact_pairwise,
    InfeasibleWithinCapError,
    OptResult,
    profile_count,
)
from .experiments import (
    greedy_baseline,
    guarantee_sweep,
    random_instance,
    tightness_sweep,
)
from .instances import (
    calibrate,
    Instance,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    ModelSpec,
    plan_cost,
    QueryPlan,
    save_instance,
    validate,
    Validation,
)
from .likelihood import (
    delta,
    log_posterior_scores,
    map_estimate,
    ObservationSet,
    sample_observations,
    TIE,
)
from .planner import (
    build_grid,
    backtrack,
    DerivedConstants,
    derive_constants,
    dp_solve,
    find_feasible_state,
    round_weights,
    run_afptas,
    SolveCertificate,
    tilt_axis,
)
from .setcover import (
    min_cover,
    reduce,
    Reduction,
    SetCoverInstance,
    verify_equivalence,
)
from .simulate import McEstimate, simulate_error

__version__ = "0.1.0"

__all__ = [
    "affinity",
    "backtrack",
    "build_grid",
    "calibrate",
    "delta",
    "DerivedConstants",
    "derive_constants",
    "dp_solve",
    "EnumerationBudgetError",
    "exact_error",
    "exact_error_table",
    "exact_opt",
    "exact_pairwise",
    "ExactErrorResult",
    "find_feasible_state",
    "greedy_baseline",
    "guarantee_sweep",
    "InfeasibleWithinCapError",
    "Instance",
    "instance_from_dict",
    "instance_to_dict",
    "is_surrogate_feasible",
    "load_instance",
    "log_affinity",
    "log_posterior_scores",
    "map_estimate",
    "McEstimate",
    "min_cover",
    "ModelSpec",
    "ObservationSet",
    "optimize_tilt",
    "OptResult",
    "ordered_pairs",
    "plan_cost",
    "profile_count",
    "QueryPlan",
    "random_instance",
    "reduce",
    "Reduction",
    "round_weights",
    "run_afptas",
    "sample_observations",
    "save_instance",
    "SetCoverInstance",
    "simulate_error",
    "SolveCertificate",
    "surrogate_error",
    "SurrogateReport",
    "TIE",
    "tightness_sweep",
    "tilt_axis",
    "validate",
    "Validation",
    "verify_equivalence",
]
