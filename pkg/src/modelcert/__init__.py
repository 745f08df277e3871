"""Model-based nonsmooth minimization with verifiable near-stationarity
certificates, checked at desk scale against a brute-force slope oracle."""

from .certificates import (
    ErrorBoundEstimate,
    StationarityCertificate,
    cert_exact_quadratic,
    cert_general_growth,
    cert_general_model_decrease,
    cert_inexact_optimal,
    cert_model_decrease,
    cert_prox_subgradient,
    estimate_slope_error_bound_L,
    inexact_error_bound,
    kl_to_slope_bound,
    model_error_bound,
    prox_stationary_error_bound,
    slope_bound_to_kl,
    step_error_bound,
)
from .composite import (
    CompositeProblem,
    ComplexityEstimate,
    Gpart,
    Hpart,
    SolveReport,
    StopRule,
    ToleranceSchedule,
    build_prox_linear_model,
    complexity_estimate,
    prox_linear_step,
    run_prox_linear,
)
from .grids import (
    GridFunction,
    KLFit,
    PointSet,
    Witness,
    dist_to_set,
    estimate_kl_parameters,
    find_certificate_witness,
    find_witness,
)
from .growth import GrowthFunction, TaylorModel, build_quadratic_model, verify_model_error
from .problems import ProblemSpec, get_problem, problem_names, registry, validate_eta
from .subsolver import (
    DualState,
    SupportSet,
    dual_value,
    gap_rate_bound,
    iterations_for_gap,
    solve_dual_accelerated,
)

__version__ = "0.1.0"
