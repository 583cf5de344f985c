"""Declarative experiment configuration: YAML file plus flag overrides."""

from __future__ import annotations

from pathlib import Path

import yaml

from .dataset import CsvSchema, GeneratorOptions
from .errors import ConfigError
from .harness import (
    METHODS,
    CsvSpec,
    ExperimentConfig,
    ModelSettings,
    OptimizerSettings,
    SyntheticSpec,
    TSettings,
)


def parse_seeds(raw) -> tuple[int, ...]:
    """Seed list from YAML or a flag string.

    Accepts an explicit list, a single integer N (meaning 0..N-1), or a
    string of comma-separated values where each value is an integer or an
    inclusive A-B range.
    """
    if isinstance(raw, int):
        return tuple(range(raw))
    if isinstance(raw, (list, tuple)):
        return tuple(int(v) for v in raw)
    if isinstance(raw, str):
        seeds: list[int] = []
        for token in raw.split(","):
            token = token.strip()
            if not token:
                continue
            if "-" in token[1:]:
                start, _, stop = token.partition("-")
                seeds.extend(range(int(start), int(stop) + 1))
            else:
                seeds.append(int(token))
        if not seeds:
            raise ConfigError(f"no seeds in {raw!r}")
        return tuple(seeds)
    raise ConfigError(f"cannot parse seeds from {raw!r}")


def parse_methods(raw) -> tuple[str, ...]:
    if isinstance(raw, str):
        raw = [token.strip() for token in raw.split(",") if token.strip()]
    methods = tuple(raw)
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ConfigError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
    return methods


def _dataset_from_mapping(raw: dict) -> SyntheticSpec | CsvSpec:
    kind = raw.get("kind", "synthetic")
    if kind == "synthetic":
        return SyntheticSpec(
            n=int(raw.get("n", 20000)),
            options=GeneratorOptions(
                feature_count=int(raw.get("feature_count", 10)),
                absolute_scale_noise=bool(raw.get("absolute_scale_noise", False)),
            ),
        )
    if kind == "csv":
        if "path" not in raw or "schema" not in raw:
            raise ConfigError("csv dataset needs 'path' and 'schema'")
        schema = raw["schema"]
        for key in ("features", "label", "group"):
            if key not in schema:
                raise ConfigError(f"csv schema needs '{key}'")
        return CsvSpec(
            path=str(raw["path"]),
            schema=CsvSchema(
                feature_columns=tuple(schema["features"]),
                label_column=str(schema["label"]),
                group_column=str(schema["group"]),
            ),
        )
    raise ConfigError(f"unknown dataset kind {kind!r}")


def config_from_mapping(raw: dict) -> ExperimentConfig:
    raw = dict(raw or {})
    optimizer = raw.get("optimizer", {})
    t_section = raw.get("t_statistic", {})
    model = raw.get("model", {})
    output = raw.get("output", {})
    epsilon = optimizer.get("epsilon")
    return ExperimentConfig(
        dataset=_dataset_from_mapping(raw.get("dataset", {"kind": "synthetic"})),
        alpha=float(raw.get("alpha", 0.1)),
        bins=int(raw.get("bins", 20)),
        evaluation_bins=int(raw.get("evaluation_bins", 20)),
        methods=parse_methods(raw.get("methods", METHODS)),
        seeds=parse_seeds(raw.get("seeds", 100)),
        split_ratios=tuple(float(r) for r in raw.get("split_ratios", (3, 1, 1))),
        optimizer=OptimizerSettings(
            max_iterations=int(optimizer.get("max_iterations", 200)),
            epsilon=None if epsilon is None else float(epsilon),
            optimize_on=str(optimizer.get("optimize_on", "test")),
        ),
        t_settings=TSettings(
            repeats=int(t_section.get("repeats", 10)),
            subsample=bool(t_section.get("subsample", False)),
        ),
        model=ModelSettings(
            learning_rate=float(model.get("learning_rate", 0.05)),
            iterations=int(model.get("iterations", 2000)),
            batch_size=int(model.get("batch_size", 256)),
        ),
        unequal_bin_weights=bool(raw.get("unequal_bin_weights", False)),
        model_cache=raw.get("model_cache"),
        out_dir=output.get("directory"),
        write_traces=bool(output.get("traces", True)),
        write_plots=bool(output.get("plots", True)),
    )


def load_config_file(path) -> ExperimentConfig:
    text = Path(path).read_text()
    raw = yaml.safe_load(text)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return config_from_mapping(raw)
