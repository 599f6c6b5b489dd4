"""Stochastic SIR dynamics with death-rate and incidence noise.

Library surface: model parameters and the incidence catalog (`model`), the
boundary stationary law and extinction/permanence threshold (`threshold`),
reproducible positivity-preserving simulation (`engine`), ensemble
estimators (`analysis`), and the experiment CLI (`cli`).
"""

from .model import (
    DerivedConstants,
    IncidenceModel,
    ModelParams,
    ParameterError,
    State,
    ValidationReport,
    derive_constants,
    make_catalog_incidence,
    make_custom_incidence,
    validate_assumption,
)
from .threshold import (
    Classification,
    StationaryLaw,
    ThresholdReport,
    boundary_integrals,
    lambda_threshold,
    r_threshold,
)
from .engine import (
    FLOOR_LOG,
    BrownianBundle,
    StepError,
    TrajectoryPath,
    make_bundle,
    simulate_boundary,
    simulate_coupled,
    simulate_full,
    step_full,
    stream_increments,
)
from .analysis import (
    EnsembleStats,
    ErgodicAverages,
    EstimationError,
    Histogram2D,
    MomentSeries,
    SlopeEstimate,
    collect_ensemble_stats,
    ergodic_average,
    extinction_rate_estimate,
    ks_statistic,
    lyapunov_estimate,
    moment_series,
    occupation_histogram,
    total_variation,
)
from .config import ConfigError, ExperimentConfig, load_config, parse_config

__version__ = "0.1.0"

__all__ = [
    "BrownianBundle",
    "Classification",
    "ConfigError",
    "DerivedConstants",
    "EnsembleStats",
    "ErgodicAverages",
    "EstimationError",
    "ExperimentConfig",
    "FLOOR_LOG",
    "Histogram2D",
    "IncidenceModel",
    "ModelParams",
    "MomentSeries",
    "ParameterError",
    "SlopeEstimate",
    "State",
    "StationaryLaw",
    "StepError",
    "ThresholdReport",
    "TrajectoryPath",
    "ValidationReport",
    "boundary_integrals",
    "collect_ensemble_stats",
    "derive_constants",
    "ergodic_average",
    "extinction_rate_estimate",
    "ks_statistic",
    "lambda_threshold",
    "load_config",
    "lyapunov_estimate",
    "make_bundle",
    "make_catalog_incidence",
    "make_custom_incidence",
    "moment_series",
    "occupation_histogram",
    "parse_config",
    "r_threshold",
    "simulate_boundary",
    "simulate_coupled",
    "simulate_full",
    "step_full",
    "stream_increments",
    "total_variation",
    "validate_assumption",
    "__version__",
]
