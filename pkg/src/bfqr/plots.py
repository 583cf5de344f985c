"""Matplotlib figures rendered next to the delimited reports."""

from __future__ import annotations

import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import ExperimentResult


def convergence_figure(result: ExperimentResult, path) -> Path | None:
    """Optimizer progress per seed: solid mean interval width, dotted bound."""
    traces = [(o.seed, o.trace) for o in result.outcomes if o.trace]
    if not traces:
        return None
    fig, ax = plt.subplots(figsize=(7, 4.5))
    cmap = plt.get_cmap("tab10")
    for slot, (seed, trace) in enumerate(traces[:10]):
        color = cmap(slot % 10)
        iters = [p.iteration for p in trace]
        ax.plot(iters, [p.union_width for p in trace], color=color, label=f"seed {seed}")
        ax.plot(
            iters,
            [p.bound for p in trace],
            color=color,
            linestyle=":",
            label=f"seed {seed} bound",
        )
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean interval width")
    ax.set_title("Width optimization")
    ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def group_coverage_figure(result: ExperimentResult, path) -> Path | None:
    """Per-bin coverage by group, averaged over seeds, one panel per method."""
    methods = [
        m
        for m in result.config.methods
        if any(m in o.per_bin_coverage for o in result.outcomes if o.error is None)
    ]
    if not methods:
        return None
    fig, axes = plt.subplots(
        1, len(methods), figsize=(3.2 * len(methods), 3.4), sharey=True, squeeze=False
    )
    for ax, method in zip(axes[0], methods):
        stacks = [
            o.per_bin_coverage[method]
            for o in result.outcomes
            if o.error is None and method in o.per_bin_coverage
        ]
        with warnings.catch_warnings():
            # cells where a group never appears are NaN in every seed
            warnings.simplefilter("ignore", RuntimeWarning)
            mean_table = np.nanmean(np.stack(stacks), axis=0)
        bins = np.arange(1, mean_table.shape[0] + 1)
        for g in range(mean_table.shape[1]):
            ax.plot(bins, mean_table[:, g] * 100.0, marker="o", ms=3, label=f"A={g}")
        ax.axhline((1.0 - result.config.alpha) * 100.0, color="gray", lw=0.8, ls="--")
        ax.set_title(method)
        ax.set_xlabel("label bin")
    axes[0][0].set_ylabel("coverage (%)")
    axes[0][0].legend(fontsize=8)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_figures(result: ExperimentResult, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for figure, name in (
        (convergence_figure, "convergence.png"),
        (group_coverage_figure, "bin_coverage.png"),
    ):
        produced = figure(result, out / name)
        if produced is not None:
            written.append(produced)
    return written
