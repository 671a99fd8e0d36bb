"""Experiment harness: data, runners, record plumbing, and the CLI."""

from .config import EXPERIMENTS, QUANTIZERS, Y_RULES, ConfigError, ExperimentConfig, load_config_file, parse_config_text
from .data import (
    DatasetFormatError,
    LeastSquares,
    gen_least_squares,
    parse_libsvm,
    planted_covariance_rows,
    synthetic_regression_fallback,
)
from .dsgd import run_dsgd
from .exchange import ExchangeResult, make_exchange
from .local_sgd import run_local_sgd
from .power_iter import run_power_iteration
from .records import (
    CODEC_BENCH_COLUMNS,
    DSGD_COLUMNS,
    LOCAL_SGD_COLUMNS,
    POWER_ITER_COLUMNS,
    PROTOCOL_BENCH_COLUMNS,
    SUBLINEAR_SIM_COLUMNS,
    emit,
    mean_over_seeds,
    parse_csv_text,
    read_rows,
    rows_to_csv_text,
)
from .sublinear_sim import run_sublinear_sim

__all__ = [
    "CODEC_BENCH_COLUMNS",
    "ConfigError",
    "DSGD_COLUMNS",
    "DatasetFormatError",
    "EXPERIMENTS",
    "ExchangeResult",
    "ExperimentConfig",
    "LOCAL_SGD_COLUMNS",
    "LeastSquares",
    "POWER_ITER_COLUMNS",
    "PROTOCOL_BENCH_COLUMNS",
    "QUANTIZERS",
    "SUBLINEAR_SIM_COLUMNS",
    "Y_RULES",
    "emit",
    "gen_least_squares",
    "load_config_file",
    "make_exchange",
    "mean_over_seeds",
    "parse_config_text",
    "parse_csv_text",
    "parse_libsvm",
    "planted_covariance_rows",
    "read_rows",
    "rows_to_csv_text",
    "run_dsgd",
    "run_local_sgd",
    "run_power_iteration",
    "run_sublinear_sim",
    "synthetic_regression_fallback",
]
