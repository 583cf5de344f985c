"""Binned fair quantile regression: distribution-free post-processing of a
quantile model into prediction sets with equal opportunity of coverage."""

from .conformal import (
    conformal_quantile,
    conformity_score,
    cqr_predict,
    gcqr_predict,
    lcqr_predict,
)
from .core import (
    BetaVector,
    ConformityRecords,
    GroupBinQuantiles,
    bfqr_interval,
    build_group_bin_quantiles,
    lookup_g,
)
from .dataset import (
    BinPartition,
    CsvSchema,
    Dataset,
    GeneratorOptions,
    SplitIndices,
    bin_of,
    generate_synthetic,
    load_csv,
    make_equal_mass_bins,
    split,
)
from .harness import ExperimentConfig, run_experiment
from .intervals import IntervalUnion, covered, hull_interval
from .metrics import (
    EvaluationRecords,
    coverage_stats,
    mean_max_gap,
    t_statistic,
    t_statistic_u_oracle,
)
from .optimizer import (
    OptimizerState,
    dummy_width_bound,
    estimate_slopes,
    init_betas,
    initialize_state,
    optimize,
)
from .quantile_model import FitOptions, QuantileModel, fit, pinball_loss

__version__ = "0.1.0"

__all__ = [
    "BetaVector",
    "BinPartition",
    "ConformityRecords",
    "CsvSchema",
    "Dataset",
    "EvaluationRecords",
    "ExperimentConfig",
    "FitOptions",
    "GeneratorOptions",
    "GroupBinQuantiles",
    "IntervalUnion",
    "OptimizerState",
    "QuantileModel",
    "SplitIndices",
    "bfqr_interval",
    "bin_of",
    "build_group_bin_quantiles",
    "conformal_quantile",
    "conformity_score",
    "coverage_stats",
    "covered",
    "cqr_predict",
    "dummy_width_bound",
    "estimate_slopes",
    "fit",
    "gcqr_predict",
    "generate_synthetic",
    "hull_interval",
    "init_betas",
    "initialize_state",
    "lcqr_predict",
    "load_csv",
    "lookup_g",
    "make_equal_mass_bins",
    "mean_max_gap",
    "optimize",
    "pinball_loss",
    "run_experiment",
    "split",
    "t_statistic",
    "t_statistic_u_oracle",
]
