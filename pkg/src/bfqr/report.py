"""Report emission: aligned text table, deterministic JSON, delimited output,
and per-seed optimizer traces."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path

from .harness import SCALED_METRICS, AggregateTable, ExperimentConfig, ExperimentResult

TABLE_COLUMNS = (
    ("mean_max_gap", "MeanMaxGap"),
    ("t_stat", "T"),
    ("marginal_coverage", "Marginal"),
    ("mean_width", "Width"),
)


def _table_value(name: str, value: float) -> float:
    if name in SCALED_METRICS or name.startswith("coverage_a"):
        return value * 100.0
    return value


def format_table(table: AggregateTable) -> str:
    """Aligned mean±std table; coverage-style metrics are shown times 100."""
    group_columns = sorted(
        (name for name in table.metric_names if name.startswith("coverage_a")),
        key=lambda name: int(name.removeprefix("coverage_a")),
    )
    columns = [c for c in TABLE_COLUMNS if c[0] in table.metric_names]
    columns += [(name, f"Cov(A={name.removeprefix('coverage_a')})") for name in group_columns]
    header = ["Method"] + [label for _, label in columns]
    rows = [header]
    for method in table.methods:
        cells = [method]
        for name, _ in columns:
            mean = table.means.get(method, {}).get(name)
            std = table.stds.get(method, {}).get(name)
            if mean is None:
                cells.append("-")
            else:
                cells.append(
                    f"{_table_value(name, mean):.2f}±{_table_value(name, std):.2f}"
                )
        rows.append(cells)
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = []
    for index, row in enumerate(rows):
        lines.append("  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip())
        if index == 0:
            lines.append("  ".join("-" * width for width in widths))
    lines.append("")
    lines.append(f"seeds completed: {table.completed_seeds}/{table.seed_count}")
    return "\n".join(lines) + "\n"


def _config_dict(config: ExperimentConfig) -> dict:
    raw = asdict(config)
    raw["dataset"]["kind"] = type(config.dataset).__name__
    return raw


def results_document(result: ExperimentResult) -> dict:
    """Machine-readable result: config echo, per-seed raw metrics, aggregates
    both raw and table-scaled."""
    table = result.table
    aggregates = {}
    for method in table.methods:
        aggregates[method] = {
            name: {
                "mean": table.means[method][name],
                "std": table.stds[method][name],
                "table_mean": _table_value(name, table.means[method][name]),
                "table_std": _table_value(name, table.stds[method][name]),
            }
            for name in table.means.get(method, {})
        }
    return {
        "config": _config_dict(result.config),
        "seed_count": table.seed_count,
        "completed_seeds": table.completed_seeds,
        "failures": {o.seed: o.error for o in result.failures},
        "per_seed": {
            str(o.seed): o.metric_values for o in result.outcomes if o.error is None
        },
        "aggregate": aggregates,
    }


def write_outputs(result: ExperimentResult, out_dir) -> list[Path]:
    """Write results.txt / results.json / results.csv and any optimizer traces.

    The JSON is serialized with sorted keys and no timestamps, so re-running
    an identical configuration reproduces the bytes exactly.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = []
        text_path = out / "results.txt"
        text_path.write_text(format_table(result.table))
        written.append(text_path)

        json_path = out / "results.json"
        json_path.write_text(
            json.dumps(results_document(result), sort_keys=True, indent=2) + "\n"
        )
        written.append(json_path)

        csv_path = out / "results.csv"
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "metric", "mean", "std"])
            for method in result.table.methods:
                for name in result.table.metric_names:
                    if name in result.table.means.get(method, {}):
                        writer.writerow(
                            [
                                method,
                                name,
                                repr(result.table.means[method][name]),
                                repr(result.table.stds[method][name]),
                            ]
                        )
        written.append(csv_path)

        if result.config.write_traces:
            for outcome in result.outcomes:
                if outcome.trace is None:
                    continue
                trace_path = out / f"trace_seed{outcome.seed}.csv"
                with open(trace_path, "w", newline="") as fh:
                    writer = csv.writer(fh)
                    writer.writerow(["iteration", "width", "bound"])
                    for point in outcome.trace:
                        writer.writerow(
                            [point.iteration, repr(point.union_width), repr(point.bound)]
                        )
                written.append(trace_path)
        return written
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc}") from exc
