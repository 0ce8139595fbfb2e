"""Weighted stochastic Riccati design for linear systems with i.i.d. random matrices.

The package designs linear state-feedback gains that are optimal for a
weighted quadratic cost, where the weight reshapes the distribution of the
random system matrices around the candidate policy. Risk-neutral,
exponential risk-sensitive, and sigmoid robust risk-sensitive policies are
all instances of one weight family choice.
"""

from .ensemble import (
    ParameterDistribution,
    SampleBank,
    build_distribution,
    derive_seed,
    draw_bank,
    expect,
    load_bank_csv,
    point_mass,
    save_bank_csv,
    stream_rng,
)
from .errors import (
    ConfigurationError,
    ConvergenceError,
    DomainViolationError,
    EigenSolverError,
    NonFiniteError,
    NumericalError,
    SingularJacobianError,
    WeightOverflowError,
    WsriccatiError,
)
from .matops import (
    compress,
    duplication_matrix,
    elimination_matrix,
    kron,
    spectral_radius,
    symmetrize,
    unvech,
    vec,
    vech,
)
from .riccati import (
    DesignProblem,
    DesignSolution,
    fixed_point_solve,
    gain_map,
    implicit_residual,
    newton_solve,
    pack_solution,
    residual_jacobian,
    solve,
    unpack_solution,
    value_map,
)
from .simulate import (
    RobustnessSummary,
    RolloutResult,
    SimulationSummary,
    mc_cost_study,
    robustness_study,
    rollout,
    worst_percent_averages,
)
from .stability import StabilityReport, closed_loop_kron_expect, ms_check, wms_check
from .weights import (
    WeightSpec,
    WeightedBank,
    build_weighted_bank,
    normalize_weights,
    predictive_cost,
    predictive_costs,
    raw_weight,
    weight_vector,
    weighted_expect,
)

__version__ = "0.1.0"

__all__ = [
    "ParameterDistribution",
    "SampleBank",
    "build_distribution",
    "point_mass",
    "draw_bank",
    "expect",
    "stream_rng",
    "derive_seed",
    "save_bank_csv",
    "load_bank_csv",
    "WeightSpec",
    "WeightedBank",
    "predictive_cost",
    "predictive_costs",
    "raw_weight",
    "normalize_weights",
    "weight_vector",
    "build_weighted_bank",
    "weighted_expect",
    "DesignProblem",
    "DesignSolution",
    "gain_map",
    "value_map",
    "fixed_point_solve",
    "pack_solution",
    "unpack_solution",
    "implicit_residual",
    "residual_jacobian",
    "newton_solve",
    "solve",
    "StabilityReport",
    "closed_loop_kron_expect",
    "ms_check",
    "wms_check",
    "RolloutResult",
    "SimulationSummary",
    "RobustnessSummary",
    "rollout",
    "worst_percent_averages",
    "mc_cost_study",
    "robustness_study",
    "vec",
    "vech",
    "unvech",
    "kron",
    "duplication_matrix",
    "elimination_matrix",
    "compress",
    "spectral_radius",
    "symmetrize",
    "WsriccatiError",
    "ConfigurationError",
    "NumericalError",
    "DomainViolationError",
    "ConvergenceError",
    "WeightOverflowError",
    "SingularJacobianError",
    "EigenSolverError",
    "NonFiniteError",
]
