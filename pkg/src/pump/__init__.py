"""Power, MDES, and sample-size estimation for multilevel randomized trials
with multiple outcomes under multiple-testing adjustments."""

__version__ = "0.1.0"

from .designs import (
    DESIGNS,
    DesignError,
    DesignParams,
    EffectSpec,
    InfeasibleDesignError,
    closed_form_sample_size,
    degrees_of_freedom,
    design_info,
    mdes_multiplier,
    standard_error,
    standard_errors,
    validate,
)
from .dgp import (
    DgpControlParams,
    DgpModelParams,
    GeneratedDataset,
    MomentEstimates,
    assign_treatment,
    empirical_moments,
    generate_dataset,
    recovered_controls,
    solve_model_params,
)
from .engine import PowerRequest, PowerTable, pump_power
from .explore import GridResult, GridSpec, expand_grid, run_grid, update_request
from .oracle import OracleEstimate, estimate_tstats, oracle_power, scheme_for
from .search import SearchGoal, SearchResult, pump_mdes, pump_sample

__all__ = [
    "DESIGNS",
    "DesignError",
    "DesignParams",
    "DgpControlParams",
    "DgpModelParams",
    "EffectSpec",
    "GeneratedDataset",
    "GridResult",
    "GridSpec",
    "InfeasibleDesignError",
    "MomentEstimates",
    "OracleEstimate",
    "PowerRequest",
    "PowerTable",
    "SearchGoal",
    "SearchResult",
    "__version__",
    "assign_treatment",
    "closed_form_sample_size",
    "degrees_of_freedom",
    "design_info",
    "empirical_moments",
    "estimate_tstats",
    "expand_grid",
    "generate_dataset",
    "mdes_multiplier",
    "oracle_power",
    "pump_mdes",
    "pump_power",
    "pump_sample",
    "recovered_controls",
    "run_grid",
    "scheme_for",
    "solve_model_params",
    "standard_error",
    "standard_errors",
    "update_request",
    "validate",
]
