"""Experiment configuration and the multi-seed sweep over calibration methods.

One seed means: draw or load data, split it, fit the base quantile model on
the training part, calibrate every requested method on the calibration part,
and score every metric on the test part. All methods within a seed share the
exact same split and base model, so metric differences isolate the
calibration method. Seeds aggregate to mean and standard deviation.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import conformal, metrics
from .core import (
    BetaVector,
    ConformityRecords,
    build_group_bin_quantiles,
    covered_points,
    hull_spans,
    interval_counts,
    subinterval_bounds,
    union_widths,
)
from .dataset import (
    CsvSchema,
    Dataset,
    GeneratorOptions,
    generate_synthetic,
    load_csv,
    make_equal_mass_bins,
    split,
)
from .errors import ConfigError
from .optimizer import PredictionBatch, TracePoint, initialize_state, optimize
from .quantile_model import FitOptions, QuantileModel, fit, load_model, save_model

logger = logging.getLogger(__name__)

METHODS = ("CQR", "GCQR", "LCQR", "BFQR", "BFQR*")

# metrics that the text table multiplies by 100
SCALED_METRICS = frozenset(
    {"marginal_coverage", "mean_max_gap", "t_stat"}
)


@dataclass(frozen=True)
class SyntheticSpec:
    n: int = 20000
    options: GeneratorOptions = GeneratorOptions()


@dataclass(frozen=True)
class CsvSpec:
    path: str
    schema: CsvSchema


@dataclass(frozen=True)
class OptimizerSettings:
    max_iterations: int = 200
    epsilon: float | None = None
    optimize_on: str = "test"


@dataclass(frozen=True)
class TSettings:
    repeats: int = 10
    subsample: bool = False


@dataclass(frozen=True)
class ModelSettings:
    learning_rate: float = 0.05
    iterations: int = 2000
    batch_size: int = 256


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: SyntheticSpec | CsvSpec = SyntheticSpec()
    alpha: float = 0.1
    bins: int = 20
    evaluation_bins: int = 20
    methods: tuple[str, ...] = METHODS
    seeds: tuple[int, ...] = tuple(range(100))
    split_ratios: tuple[float, float, float] = (3.0, 1.0, 1.0)
    optimizer: OptimizerSettings = OptimizerSettings()
    t_settings: TSettings = TSettings()
    model: ModelSettings = ModelSettings()
    unequal_bin_weights: bool = False
    model_cache: str | None = None
    out_dir: str | None = None
    write_traces: bool = True
    write_plots: bool = True

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.bins < 1 or self.evaluation_bins < 1:
            raise ConfigError("bin counts must be at least 1")
        if not self.methods:
            raise ConfigError("at least one method is required")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ConfigError(f"unknown methods: {sorted(unknown)}")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if self.optimizer.optimize_on not in ("test", "calibration"):
            raise ConfigError("optimize_on must be 'test' or 'calibration'")


@dataclass
class SeedOutcome:
    seed: int
    metric_values: dict[str, dict[str, float]] = field(default_factory=dict)
    per_bin_coverage: dict[str, np.ndarray] = field(default_factory=dict)
    trace: list[TracePoint] | None = None
    error: str | None = None


@dataclass
class AggregateTable:
    methods: tuple[str, ...]
    metric_names: tuple[str, ...]
    means: dict[str, dict[str, float]]
    stds: dict[str, dict[str, float]]
    seed_count: int
    completed_seeds: int


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    table: AggregateTable
    outcomes: list[SeedOutcome]

    @property
    def failures(self) -> list[SeedOutcome]:
        return [o for o in self.outcomes if o.error is not None]


def _fit_options(config: ExperimentConfig, seed: int) -> FitOptions:
    return FitOptions(
        learning_rate=config.model.learning_rate,
        iterations=config.model.iterations,
        batch_size=config.model.batch_size,
        seed=seed,
    )


def _model_cache_key(features, labels, levels, options: FitOptions) -> str:
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(features).tobytes())
    digest.update(np.ascontiguousarray(labels).tobytes())
    digest.update(repr((levels, options)).encode())
    return digest.hexdigest()


def _train_model(config, features, labels, levels, options) -> QuantileModel:
    if config.model_cache is None:
        return fit(features, labels, levels, options)
    cache_dir = Path(config.model_cache)
    cache_dir.mkdir(parents=True, exist_ok=True)
    path = cache_dir / f"{_model_cache_key(features, labels, levels, options)}.model"
    if path.exists():
        return load_model(path)
    model = fit(features, labels, levels, options)
    save_model(model, path)
    return model


def _records_from_bounds(lower, upper, labels, groups) -> metrics.EvaluationRecords:
    return metrics.EvaluationRecords(
        covered=((lower <= labels) & (labels <= upper)) & (lower <= upper),
        groups=groups,
        labels=labels,
        widths=np.clip(upper - lower, 0.0, None),
        interval_counts=(upper >= lower).astype(int),
    )


def _method_report(
    config: ExperimentConfig,
    records: metrics.EvaluationRecords,
    seed: int,
    mean_hull_width: float | None = None,
    fallback_count: int = 0,
) -> metrics.MetricsReport:
    return metrics.evaluate_records(
        records,
        evaluation_bins=config.evaluation_bins,
        t_repeats=config.t_settings.repeats,
        t_seed=seed,
        t_subsample=config.t_settings.subsample,
        mean_hull_width=mean_hull_width,
        fallback_count=fallback_count,
    )


def run_seed(config: ExperimentConfig, seed: int, data: Dataset | None = None) -> SeedOutcome:
    """Execute one full train/calibrate/evaluate pass for one seed."""
    outcome = SeedOutcome(seed=seed)
    if data is None:
        if not isinstance(config.dataset, SyntheticSpec):
            data = load_csv(config.dataset.path, config.dataset.schema)
        else:
            data = generate_synthetic(config.dataset.n, seed, config.dataset.options)
    parts = split(data, config.split_ratios, seed)
    levels = (config.alpha / 2.0, 1.0 - config.alpha / 2.0)
    model = _train_model(
        config,
        data.features[parts.train],
        data.labels[parts.train],
        levels,
        _fit_options(config, seed),
    )

    cal_lo, cal_hi = model.predict_batch(data.features[parts.calibration])
    cal_labels = data.labels[parts.calibration]
    cal_groups = data.groups[parts.calibration]
    scores = conformal.conformity_score(cal_lo, cal_hi, cal_labels)
    partition = make_equal_mass_bins(cal_labels, config.bins)
    records = ConformityRecords.from_calibration(scores, cal_groups, partition)

    test_lo, test_hi = model.predict_batch(data.features[parts.test])
    test_labels = data.labels[parts.test]
    test_groups = data.groups[parts.test]

    needs_bfqr = bool({"BFQR", "BFQR*"} & set(config.methods))
    bfqr_rows = None
    if needs_bfqr:
        gbq = build_group_bin_quantiles(records, data.group_count, config.bins)
        weights = partition.member_counts if config.unequal_bin_weights else None
        if config.optimizer.optimize_on == "calibration":
            objective = PredictionBatch(cal_lo, cal_hi, cal_groups)
        else:
            objective = PredictionBatch(test_lo, test_hi, test_groups)
        state = initialize_state(records, partition, gbq, objective, config.alpha, weights)
        betas = optimize(
            state,
            config.alpha,
            max_iterations=config.optimizer.max_iterations,
            epsilon=config.optimizer.epsilon,
        )
        outcome.trace = list(state.trace)
        lower, upper, fallbacks = subinterval_bounds(
            test_lo, test_hi, test_groups, betas, gbq, partition
        )
        bfqr_rows = (lower, upper, fallbacks)

    for method in config.methods:
        hull_width = None
        fallback_count = 0
        if method == "CQR":
            lo, hi = conformal.cqr_bounds(model, scores, config.alpha, data.features[parts.test])
            rec = _records_from_bounds(lo, hi, test_labels, test_groups)
        elif method == "GCQR":
            pools = conformal.split_scores_by_group(scores, cal_groups, data.group_count)
            lo, hi = conformal.gcqr_bounds(
                model, pools, config.alpha, data.features[parts.test], test_groups
            )
            rec = _records_from_bounds(lo, hi, test_labels, test_groups)
        elif method == "LCQR":
            pooled_records = ConformityRecords(
                records.scores, np.zeros(len(records), dtype=int), records.bins, records.indices
            )
            pooled_gbq = build_group_bin_quantiles(pooled_records, 1, config.bins)
            flat = BetaVector(np.full(config.bins, 1.0 - config.alpha), 1.0 - config.alpha)
            lower, upper, _ = subinterval_bounds(
                test_lo,
                test_hi,
                np.zeros(len(test_labels), dtype=int),
                flat,
                pooled_gbq,
                partition,
            )
            hull_lo, hull_hi, _, _, nonempty = hull_spans(lower, upper)
            hull_width = float(np.where(nonempty, hull_hi - hull_lo, 0.0).mean())
            rec = metrics.EvaluationRecords(
                covered=covered_points(lower, upper, test_labels),
                groups=test_groups,
                labels=test_labels,
                widths=union_widths(lower, upper),
                interval_counts=interval_counts(lower, upper),
            )
        elif method == "BFQR":
            lower, upper, fallback_count = bfqr_rows
            hull_lo, hull_hi, _, _, nonempty = hull_spans(lower, upper)
            hull_width = float(np.where(nonempty, hull_hi - hull_lo, 0.0).mean())
            rec = metrics.EvaluationRecords(
                covered=covered_points(lower, upper, test_labels),
                groups=test_groups,
                labels=test_labels,
                widths=union_widths(lower, upper),
                interval_counts=interval_counts(lower, upper),
            )
        elif method == "BFQR*":
            lower, upper, fallback_count = bfqr_rows
            hull_lo, hull_hi, _, _, nonempty = hull_spans(lower, upper)
            covered = nonempty & (hull_lo <= test_labels) & (test_labels <= hull_hi)
            rec = metrics.EvaluationRecords(
                covered=covered,
                groups=test_groups,
                labels=test_labels,
                widths=np.where(nonempty, hull_hi - hull_lo, 0.0),
                interval_counts=nonempty.astype(int),
            )
        else:  # pragma: no cover - guarded by config validation
            raise ConfigError(f"unknown method {method}")
        report = _method_report(config, rec, seed, hull_width, fallback_count)
        outcome.metric_values[method] = report.as_dict()
        outcome.per_bin_coverage[method] = report.per_bin_coverage
    return outcome


def aggregate(config: ExperimentConfig, outcomes: list[SeedOutcome]) -> AggregateTable:
    """Mean and standard deviation per (method, metric) over completed seeds."""
    completed = [o for o in outcomes if o.error is None]
    metric_names: list[str] = []
    for outcome in completed:
        for method in config.methods:
            for name in outcome.metric_values.get(method, {}):
                if name not in metric_names:
                    metric_names.append(name)
    means: dict[str, dict[str, float]] = {}
    stds: dict[str, dict[str, float]] = {}
    for method in config.methods:
        means[method] = {}
        stds[method] = {}
        for name in metric_names:
            series = [
                o.metric_values[method][name]
                for o in completed
                if name in o.metric_values.get(method, {})
            ]
            if series:
                means[method][name] = float(np.mean(series))
                stds[method][name] = float(np.std(series))
    return AggregateTable(
        methods=config.methods,
        metric_names=tuple(metric_names),
        means=means,
        stds=stds,
        seed_count=len(config.seeds),
        completed_seeds=len(completed),
    )


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run every configured seed, aggregating the survivors.

    A failing seed is recorded and skipped; the table reports how many seeds
    completed.
    """
    shared_data = None
    if isinstance(config.dataset, CsvSpec):
        shared_data = load_csv(config.dataset.path, config.dataset.schema)
    outcomes = []
    for seed in config.seeds:
        try:
            outcomes.append(run_seed(config, seed, shared_data))
        except Exception as exc:  # noqa: BLE001 - seed isolation is the contract
            logger.exception("seed %d failed", seed)
            outcomes.append(SeedOutcome(seed=seed, error=f"{type(exc).__name__}: {exc}"))
    return ExperimentResult(config, aggregate(config, outcomes), outcomes)


def bin_weights_from_partition(partition) -> np.ndarray:
    """Per-bin constraint weights proportional to bin populations."""
    counts = partition.member_counts.astype(float)
    return counts / counts.sum()
