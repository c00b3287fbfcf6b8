"""Conditional sieve-bootstrap prediction bands for functional time series."""

from .bands import (
    PredictionBand,
    pointwise_band,
    pointwise_interval,
    quantile,
    simultaneous_band,
    sup_statistics,
)
from .bootstrap import BootstrapConfig, BootstrapEnsemble, run
from .curves import FunctionalSeries, Grid, center, inner_product, l2_norm, read_csv, sup_norm, write_csv
from .errors import (
    ContractViolationError,
    DegenerateDataError,
    FitError,
    FuncbandError,
    InstabilityError,
    InvalidInputError,
    RankError,
    ReplicateFailureError,
    SelectionError,
)
from .evaluation import ForecastRecord, conditional_mse, coverage, cpd, interval_score
from .fpca import covariance_operator, decompose, eigendecompose, fpca, select_m
from .predictors import PredictorSpec, fit_predictor
from .sim import DgpConfig, StudyConfig, case_config, expanding_window_eval, rolling_study, simulate_farma
from .var import backward_noise_filter, fit_backward, fit_forward, select_p_aicc

__version__ = "0.1.0"
