"""isomix: component CDF estimation from right-censored mixture data with
known per-subject mixture probabilities.

The flagship estimator is an EM algorithm whose M-step is a weighted
isotonic regression solved by the pool-adjacent-violators algorithm; NPMLE
baselines, a pointwise binomial-likelihood EM, permutation tests, bootstrap
bands, and a Monte-Carlo harness are included.
"""

from ._kernels import BACKEND
from .core import (
    CurveSet,
    MixtureSample,
    Observation,
    StepFunction,
    TimeGrid,
    default_grid,
    eval_curve,
    read_sample,
    validate_sample,
    write_sample,
)
from .errors import (
    CalibrationFailure,
    EstimationError,
    IsomixError,
    NoEvents,
    NotIdentifiable,
    TooManyFailures,
    ValidationError,
)
from .estimators import (
    METHODS,
    EmConfig,
    EstimateReport,
    binomial_pointwise_em,
    em_pava,
    estep_weights,
    estimate,
    kaplan_meier_estimate,
    ks_gof_statistic,
    npmle_type1,
    npmle_type2,
)
from .inference import (
    BootstrapResult,
    PermutationResult,
    bootstrap_bands,
    permutation_test,
)
from .isotonic import IsotonicProblem, maxmin_oracle, pava
from .simulation import (
    ExperimentSpec,
    MetricsReport,
    calibrate_censoring,
    experiment,
    power_study,
    run_replications,
    sample_experiment,
)
from .survival import KmCurve, kaplan_meier, km_to_cdf

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BootstrapResult",
    "CalibrationFailure",
    "CurveSet",
    "EmConfig",
    "EstimateReport",
    "EstimationError",
    "ExperimentSpec",
    "IsomixError",
    "IsotonicProblem",
    "KmCurve",
    "METHODS",
    "MetricsReport",
    "MixtureSample",
    "NoEvents",
    "NotIdentifiable",
    "Observation",
    "PermutationResult",
    "StepFunction",
    "TimeGrid",
    "TooManyFailures",
    "ValidationError",
    "binomial_pointwise_em",
    "bootstrap_bands",
    "calibrate_censoring",
    "default_grid",
    "em_pava",
    "estep_weights",
    "estimate",
    "eval_curve",
    "experiment",
    "kaplan_meier",
    "kaplan_meier_estimate",
    "km_to_cdf",
    "ks_gof_statistic",
    "maxmin_oracle",
    "npmle_type1",
    "npmle_type2",
    "pava",
    "permutation_test",
    "power_study",
    "read_sample",
    "run_replications",
    "sample_experiment",
    "validate_sample",
    "write_sample",
]
