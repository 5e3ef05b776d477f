"""Lagged rank estimators of first-order Sobol indices and their averages."""

from sobol_rank.estimators import (
    DegenerateOutputError,
    InvalidSampleError,
    LagEstimates,
    LagRangeError,
    OrderedSample,
    PairedSample,
    SobolEstimate,
    adaptive_k,
    default_k,
    eta_avg,
    eta_lag,
    eta_lags,
    order_by_input,
    sobol_from_sample,
)
from sobol_rank.models import (
    BiasBoundSpec,
    Exponential,
    ModelSpec,
    ModelSpecError,
    QuadratureAccuracyError,
    TheorySummary,
    Uniform,
    asymptotic_cov,
    bias_bound,
    estimate_regularity_constants,
    expected_range,
    make_model,
    parse_law,
    sample_model,
    theory_summary,
)
from sobol_rank.study import (
    BoxplotStats,
    StudyConfig,
    StudyError,
    StudyReport,
    bias_bound_check,
    empirical_lag_cov,
    mse_curve,
    run_study,
)

__version__ = "0.1.0"
