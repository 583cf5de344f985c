"""Command-line harness: configure a sweep, run it, and write the reports."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .config import config_from_mapping, load_config_file, parse_methods, parse_seeds
from .errors import BfqrError
from .harness import METHODS, ExperimentConfig, SyntheticSpec, run_experiment
from .report import format_table, write_outputs


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bfqr",
        description=(
            "Run seeded conformal-calibration experiments and report coverage, "
            "fairness and width metrics per method."
        ),
    )
    parser.add_argument("--config", help="YAML experiment configuration file")
    parser.add_argument(
        "--dataset",
        choices=["synthetic", "csv"],
        help="dataset kind; csv details must come from the config file",
    )
    parser.add_argument("--n", type=int, help="synthetic sample count")
    parser.add_argument("--alpha", type=float, help="target error rate")
    parser.add_argument("--bins", type=int, help="calibration bin count")
    parser.add_argument(
        "--methods", help=f"comma-separated subset of {', '.join(METHODS)}"
    )
    parser.add_argument(
        "--seeds",
        help="comma-separated seed values and inclusive A-B ranges, e.g. 0-19",
    )
    parser.add_argument("--max-iters", type=int, help="optimizer iteration cap")
    parser.add_argument(
        "--epsilon", type=float, help="slope-error tolerance override for the optimizer"
    )
    parser.add_argument(
        "--optimize-on",
        choices=["test", "calibration"],
        help="which split's features drive the width objective",
    )
    parser.add_argument("--t-repeats", type=int, help="independence-statistic repeats")
    parser.add_argument("--out", help="output directory for reports and figures")
    parser.add_argument(
        "--plots",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="render figures alongside the reports",
    )
    parser.add_argument(
        "--traces",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="write per-seed optimizer trace files",
    )
    parser.add_argument("--verbose", action="store_true", help="log progress")
    return parser


def apply_overrides(config: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    updates = {}
    if args.dataset == "synthetic":
        if not isinstance(config.dataset, SyntheticSpec):
            updates["dataset"] = SyntheticSpec()
    elif args.dataset == "csv":
        if isinstance(config.dataset, SyntheticSpec):
            raise BfqrError("csv datasets need a config file carrying path and schema")
    if args.n is not None:
        base = updates.get("dataset", config.dataset)
        if not isinstance(base, SyntheticSpec):
            raise BfqrError("--n applies to synthetic datasets only")
        updates["dataset"] = dataclasses.replace(base, n=args.n)
    if args.alpha is not None:
        updates["alpha"] = args.alpha
    if args.bins is not None:
        updates["bins"] = args.bins
    if args.methods is not None:
        updates["methods"] = parse_methods(args.methods)
    if args.seeds is not None:
        updates["seeds"] = parse_seeds(args.seeds)
    optimizer = config.optimizer
    if args.max_iters is not None:
        optimizer = dataclasses.replace(optimizer, max_iterations=args.max_iters)
    if args.epsilon is not None:
        optimizer = dataclasses.replace(optimizer, epsilon=args.epsilon)
    if args.optimize_on is not None:
        optimizer = dataclasses.replace(optimizer, optimize_on=args.optimize_on)
    if optimizer is not config.optimizer:
        updates["optimizer"] = optimizer
    if args.t_repeats is not None:
        updates["t_settings"] = dataclasses.replace(
            config.t_settings, repeats=args.t_repeats
        )
    if args.out is not None:
        updates["out_dir"] = args.out
    if args.plots is not None:
        updates["write_plots"] = args.plots
    if args.traces is not None:
        updates["write_traces"] = args.traces
    return dataclasses.replace(config, **updates) if updates else config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.config:
            config = load_config_file(args.config)
        else:
            config = config_from_mapping({})
        config = apply_overrides(config, args)
        result = run_experiment(config)
        sys.stdout.write(format_table(result.table))
        if config.out_dir:
            written = write_outputs(result, config.out_dir)
            if config.write_plots:
                from .plots import render_figures

                written += render_figures(result, config.out_dir)
            for path in written:
                sys.stdout.write(f"wrote {path}\n")
        if result.failures:
            for outcome in result.failures:
                sys.stderr.write(f"seed {outcome.seed} failed: {outcome.error}\n")
            return 1
        return 0
    except (BfqrError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
