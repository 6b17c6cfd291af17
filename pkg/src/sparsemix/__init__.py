"""Numerical laboratory for sparse-mixture detection boundaries."""

from .boundary import (BoundaryReport, boundary_report, check_hc_optimality, closed_form_beta,
                       compute_t0_t1, solve_beta_hc, solve_beta_star)
from .errors import (ComputationError, ConfigError, ParameterError, SparsemixError,
                     UnsupportedOperation)
from .experiments import (ExperimentConfig, HellingerEstimate, RiskEstimate, estimate_risk,
                          hellinger_sq, hellinger_trend, phase_sweep)
from .hc import HCOutcome, hc_classical, hc_star, hc_test, np_oracle_test, t_statistic
from .models import (log_lr, null_log_lr_tail, null_lr_tail, sample_alternative, sample_null,
                     tail_condition_estimate)
from .rate import RateFunction, analytic_rate, legendre_transform
from .specs import parse_spec

__version__ = "0.1.0"

__all__ = [
    "BoundaryReport", "ComputationError", "ConfigError", "ExperimentConfig", "HCOutcome",
    "HellingerEstimate", "ParameterError", "RateFunction", "RiskEstimate", "SparsemixError",
    "UnsupportedOperation", "analytic_rate", "boundary_report", "check_hc_optimality",
    "closed_form_beta", "compute_t0_t1", "estimate_risk", "hc_classical", "hc_star", "hc_test",
    "hellinger_sq", "hellinger_trend", "legendre_transform", "log_lr", "np_oracle_test",
    "null_log_lr_tail", "null_lr_tail", "parse_spec", "phase_sweep", "sample_alternative",
    "sample_null", "solve_beta_hc", "solve_beta_star", "t_statistic", "tail_condition_estimate",
]
