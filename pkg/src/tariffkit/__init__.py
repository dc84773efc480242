"""tariffkit: demand estimation from B2B deal data and optimization of
nonlinear price schedules, with built-in synthetic markets and brute-force
oracles for verification."""

from .market import (
    CostParams,
    CustomerRecord,
    Market,
    SizeBinConfig,
    ValueModel,
    gross_value,
    mean_value,
)
from .tariff import (
    PriceSchedule,
    is_concave_increasing,
    marginal_price,
    total_price,
    unit_price,
)
from .choice import (
    PurchaseDecision,
    ValueEnvelope,
    brute_force_purchase,
    candidate_quantities,
    solve_purchase,
    value_envelope,
)
from .synth import CovariateSpec, GeneratorSettings, SyntheticDraw, generate_market
from .estimation import (
    EstimationConfig,
    FitResult,
    augment_zero_price,
    bootstrap,
    calibrate_costs,
    empirical_size_distribution,
    filter_concavity_dips,
    fit_mle,
    success_probability,
)
from .profit import ProfitEvaluator, ProfitReport, expected_profit, welfare
from .optimize import (
    GridBisectionConfig,
    IndividualOptimum,
    NelderMeadConfig,
    grid_bisection,
    individually_optimized,
    initial_grid_start,
    nelder_mead,
    optimize_schedule,
)
from .counterfactuals import (
    ExperimentArm,
    ExperimentRow,
    IcGapAnalysis,
    ScenarioResult,
    cost_sweep,
    experimental_recovery,
    first_degree,
    homogenize_demand,
    ic_gap_analysis,
    simulate_counterfactual_outcomes,
    simulate_price_experiment,
    third_degree_by_covariates,
    third_degree_by_size,
)
from .kernels import BACKEND as KERNEL_BACKEND

__version__ = "0.1.0"

__all__ = [
    "CostParams",
    "CustomerRecord",
    "Market",
    "SizeBinConfig",
    "ValueModel",
    "gross_value",
    "mean_value",
    "PriceSchedule",
    "is_concave_increasing",
    "marginal_price",
    "total_price",
    "unit_price",
    "PurchaseDecision",
    "ValueEnvelope",
    "brute_force_purchase",
    "candidate_quantities",
    "solve_purchase",
    "value_envelope",
    "CovariateSpec",
    "GeneratorSettings",
    "SyntheticDraw",
    "generate_market",
    "EstimationConfig",
    "FitResult",
    "augment_zero_price",
    "bootstrap",
    "calibrate_costs",
    "empirical_size_distribution",
    "filter_concavity_dips",
    "fit_mle",
    "success_probability",
    "ProfitEvaluator",
    "ProfitReport",
    "expected_profit",
    "welfare",
    "GridBisectionConfig",
    "IndividualOptimum",
    "NelderMeadConfig",
    "grid_bisection",
    "individually_optimized",
    "initial_grid_start",
    "nelder_mead",
    "optimize_schedule",
    "ExperimentArm",
    "ExperimentRow",
    "IcGapAnalysis",
    "ScenarioResult",
    "cost_sweep",
    "experimental_recovery",
    "first_degree",
    "homogenize_demand",
    "ic_gap_analysis",
    "simulate_counterfactual_outcomes",
    "simulate_price_experiment",
    "third_degree_by_covariates",
    "third_degree_by_size",
    "KERNEL_BACKEND",
]
