"""Group-fused graphical lasso: sparse, piecewise-constant precision
matrices and their changepoints."""

__version__ = "0.1.0"

from .core import (
    GroundTruth,
    LocalCovarianceSeq,
    NotPositiveDefiniteError,
    PrecisionSequence,
    RegularizationConfig,
    Segmentation,
    TimeSeries,
    gfgl_objective,
    local_covariances,
    support_pairs,
)
from .estimator import GroupFusedGraphicalLasso
from .evaluate import (
    EvalReport,
    changepoint_errors,
    evaluate_fit,
    incoherence_alpha,
    sign_consistency,
    theory_constants,
)
from .path import lambda2_path, lambda2_upper
from .segmentation import block_precisions, extract_changepoints, max_overlap_alignment
from .simulate import SimSpec, empirical_cov_error_experiment, generate_truth, sample_timeseries
from .solver import (
    NumericalFailureError,
    SolveResult,
    SolverConfig,
    SolverError,
    SolverState,
    UnboundedObjectiveError,
    admm_solve,
    compute_residuals,
    warm_start_solve,
)
from .stationarity import kkt_residual

__all__ = [
    "GroundTruth", "LocalCovarianceSeq", "NotPositiveDefiniteError", "PrecisionSequence",
    "RegularizationConfig", "Segmentation", "TimeSeries", "gfgl_objective",
    "local_covariances", "support_pairs", "GroupFusedGraphicalLasso", "EvalReport",
    "changepoint_errors", "evaluate_fit", "incoherence_alpha", "sign_consistency",
    "theory_constants", "lambda2_path", "lambda2_upper", "block_precisions",
    "extract_changepoints", "max_overlap_alignment", "SimSpec",
    "empirical_cov_error_experiment", "generate_truth", "sample_timeseries",
    "NumericalFailureError", "SolveResult", "SolverConfig", "SolverError", "SolverState",
    "UnboundedObjectiveError", "admm_solve", "compute_residuals", "warm_start_solve",
    "kkt_residual",
]
