"""Greedy paired-step search over per-bin coverage targets.

Minimizes the mean test-set interval width subject to a fixed weighted mean of
the coverage targets. Each step raises the target of the bin with the cheapest
estimated width increase and lowers the bin with the steepest estimated width
decrease by the same (weight-adjusted) amount, so the constraint is preserved
exactly. Steps are sized to one quantile rank of the smallest affected cell,
and the loop stops once no step improves the hull-based width bound beyond
twice the slope-estimation error.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .conformal import conformal_quantile
from .core import (
    BetaVector,
    ConformityRecords,
    GroupBinQuantiles,
    cell_quantile,
    hull_spans,
    project_to_constraint,
    subinterval_bounds,
    union_widths,
)
from .dataset import BinPartition

logger = logging.getLogger(__name__)

STEP_FLOOR = 1e-6
_ACCEPT_SLACK = 1e-12


@dataclass(frozen=True)
class PredictionBatch:
    """Base-model interval endpoints and group ids for the objective sample."""

    q_lo: np.ndarray
    q_hi: np.ndarray
    groups: np.ndarray

    def __len__(self) -> int:
        return len(self.q_lo)


@dataclass(frozen=True)
class TracePoint:
    iteration: int
    union_width: float
    hull_width: float
    bound: float


@dataclass
class OptimizerState:
    """Mutable loop state: current targets, counters, step bounds, and the
    objective trace (mean union width, mean hull width, width bound)."""

    betas: BetaVector
    gbq: GroupBinQuantiles
    partition: BinPartition
    predictions: PredictionBatch
    start_widths: np.ndarray
    pooled_offset: float
    counters: np.ndarray = field(default=None, repr=False)
    eta_up: np.ndarray = None
    eta_down: np.ndarray = None
    iteration: int = 0
    trace: list[TracePoint] = field(default_factory=list)


def init_betas(
    records: ConformityRecords, partition: BinPartition, alpha: float, weights=None
) -> BetaVector:
    """Per-bin coverage of the pooled split-conformal solution, projected so
    the weighted mean equals 1 - alpha exactly."""
    pooled_offset = conformal_quantile(records.scores, 1.0 - alpha)
    raw = np.empty(partition.bin_count)
    for m in range(partition.bin_count):
        bin_scores = records.scores[records.bins == m]
        # a label sits inside the widened interval exactly when its score is
        # at most the pooled offset
        raw[m] = float(np.mean(bin_scores <= pooled_offset)) if len(bin_scores) else 1.0 - alpha
    values = project_to_constraint(raw, 1.0 - alpha, weights)
    return BetaVector(values, 1.0 - alpha, weights)


def estimate_slopes(
    gbq: GroupBinQuantiles, group: int, bin_index: int, beta: float, delta: float
) -> tuple[float, float]:
    """One-sided difference quotients of the cell quantile function at beta.

    Returns (upward, downward); both are non-negative because the score pool
    is sorted. A side with no headroom inside [0, 1] reports slope 0, as does
    a cell with fewer than two scores.
    """
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    cell = gbq.cell(group, bin_index)
    if len(cell) < 2:
        logger.warning(
            "cell group=%d bin=%d too small for slope estimation", group, bin_index
        )
        return 0.0, 0.0

    def g(b):
        return cell_quantile(cell, b, clamp=True)

    up = (g(beta + delta) - g(beta)) / delta if beta + delta <= 1.0 else 0.0
    down = (g(beta) - g(beta - delta)) / delta if beta - delta >= 0.0 else 0.0
    return up, down


def _cell_slope_tables(gbq: GroupBinQuantiles, betas: BetaVector):
    """Slopes for every cell at the current targets, each taken over the
    cell's own rank step."""
    shape = (gbq.group_count, gbq.bin_count)
    t_up = np.zeros(shape)
    t_down = np.zeros(shape)
    for a in range(gbq.group_count):
        for m in range(gbq.bin_count):
            n = gbq.counts[a, m]
            if n < 2:
                continue
            t_up[a, m], t_down[a, m] = estimate_slopes(
                gbq, a, m, float(betas.values[m]), 1.0 / (n + 1.0)
            )
    return t_up, t_down


def compute_counters(
    lower: np.ndarray,
    upper: np.ndarray,
    partition: BinPartition,
    groups: np.ndarray,
    group_count: int,
) -> np.ndarray:
    """Per-(group, bin) counts of test points whose bin slice reacts to a
    target change: partial slices plus the hull boundary bins."""
    nonempty = upper >= lower
    widths = np.clip(upper - lower, 0.0, None)
    partial = nonempty & (widths < partition.bin_widths[None, :])
    _, _, first, last, any_row = hull_spans(lower, upper)
    affected = partial.copy()
    rows = np.flatnonzero(any_row)
    affected[rows, first[rows]] = True
    affected[rows, last[rows]] = True
    counters = np.zeros((group_count, partition.bin_count), dtype=int)
    for a in range(group_count):
        counters[a] = affected[groups == a].sum(axis=0)
    return counters


def approx_gradients(
    counters: np.ndarray, t_up: np.ndarray, t_down: np.ndarray, test_size: int
) -> tuple[np.ndarray, np.ndarray]:
    """Estimated per-bin width change per unit of target change, aggregated
    over groups and normalized by the objective sample size."""
    grad_up = np.where(counters > 0, counters * t_up, 0.0).sum(axis=0) / test_size
    grad_down = np.where(counters > 0, counters * t_down, 0.0).sum(axis=0) / test_size
    return grad_up, grad_down


def dummy_width_bound(
    betas: BetaVector,
    gbq: GroupBinQuantiles,
    partition: BinPartition,
    predictions: PredictionBatch,
    start_widths: np.ndarray,
    pooled_offset: float,
) -> float:
    """Hull-based upper bound on the mean interval width.

    Starting from the split-conformal widths, each point is corrected by the
    offsets its hull actually realizes at the two boundary bins, minus twice
    the pooled offset those widths were built with. The realized offsets are
    the boundary-bin quantiles whenever the hull ends inside a bin, and are
    never larger, so with start widths floored at zero the corrected value
    dominates the hull width point by point. Points whose union is empty
    keep their starting width.
    """
    lower, upper, _ = subinterval_bounds(
        predictions.q_lo, predictions.q_hi, predictions.groups, betas, gbq, partition
    )
    hull_lo, hull_hi, _, _, any_row = hull_spans(lower, upper)
    rows = np.flatnonzero(any_row)
    correction = np.zeros(len(predictions))
    correction[rows] = (
        (predictions.q_lo[rows] - hull_lo[rows])
        + (hull_hi[rows] - predictions.q_hi[rows])
        - 2.0 * pooled_offset
    )
    return float(start_widths.mean() + correction.mean())


def _evaluate(state: OptimizerState, betas: BetaVector):
    lower, upper, _ = subinterval_bounds(
        state.predictions.q_lo,
        state.predictions.q_hi,
        state.predictions.groups,
        betas,
        state.gbq,
        state.partition,
    )
    union_mean = float(union_widths(lower, upper).mean())
    hull_lo, hull_hi, _, _, _ = hull_spans(lower, upper)
    hull_mean = float(np.clip(hull_hi - hull_lo, 0.0, None).mean())
    bound = dummy_width_bound(
        betas,
        state.gbq,
        state.partition,
        state.predictions,
        state.start_widths,
        state.pooled_offset,
    )
    return lower, upper, union_mean, hull_mean, bound


def initialize_state(
    records: ConformityRecords,
    partition: BinPartition,
    gbq: GroupBinQuantiles,
    predictions: PredictionBatch,
    alpha: float,
    weights=None,
) -> OptimizerState:
    """Build the loop state at the split-conformal starting point."""
    betas = init_betas(records, partition, alpha, weights)
    pooled_offset = conformal_quantile(records.scores, 1.0 - alpha)
    start_widths = np.clip(
        predictions.q_hi - predictions.q_lo + 2.0 * pooled_offset, 0.0, None
    )
    state = OptimizerState(
        betas=betas,
        gbq=gbq,
        partition=partition,
        predictions=predictions,
        start_widths=start_widths,
        pooled_offset=float(pooled_offset),
    )
    lower, upper, union_mean, hull_mean, bound = _evaluate(state, betas)
    state.counters = compute_counters(
        lower, upper, partition, predictions.groups, gbq.group_count
    )
    state.trace.append(TracePoint(0, union_mean, hull_mean, bound))
    return state


def _bin_rank_steps(gbq: GroupBinQuantiles) -> np.ndarray:
    """Smallest per-bin quantile rank step over the populated cells."""
    steps = np.empty(gbq.bin_count)
    for m in range(gbq.bin_count):
        ns = gbq.counts[:, m]
        populated = ns[ns >= 1]
        size = populated.min() if len(populated) else len(gbq.pooled[m])
        steps[m] = 1.0 / (size + 1.0)
    return steps


def _slope_error(gbq: GroupBinQuantiles, bins) -> float:
    """Default slope-error tolerance: the largest IQR / sqrt(n) over the
    populated cells of the affected bins."""
    worst = 0.0
    for m in bins:
        for a in range(gbq.group_count):
            cell = gbq.cell(a, m)
            if len(cell) < 2:
                continue
            iqr = float(np.quantile(cell, 0.75) - np.quantile(cell, 0.25))
            worst = max(worst, iqr / np.sqrt(len(cell)))
    return worst


def optimize(
    state: OptimizerState,
    alpha: float,
    max_iterations: int = 200,
    epsilon: float | None = None,
    step_floor: float = STEP_FLOOR,
) -> BetaVector:
    """Run paired-step descent on the width bound; returns the final targets.

    A candidate step is kept only if the bound does not increase, so the
    bound trace is non-increasing by construction. The weighted target mean
    is preserved identically at every step.
    """
    if abs(state.betas.target_mean - (1.0 - alpha)) > 1e-9:
        raise ValueError("optimizer state was initialized for a different alpha")
    if max_iterations <= 0:
        return state.betas
    weights = state.betas.weights
    # normalizer that reduces to the plain gradients for equal-mass bins
    scale = 1.0 / (len(weights) * weights)
    n_test = len(state.predictions)
    lower, upper, union_mean, hull_mean, bound = _evaluate(state, state.betas)
    if not state.trace:
        state.trace.append(TracePoint(state.iteration, union_mean, hull_mean, bound))
    while state.iteration < max_iterations:
        state.counters = compute_counters(
            lower, upper, state.partition, state.predictions.groups, state.gbq.group_count
        )
        t_up, t_down = _cell_slope_tables(state.gbq, state.betas)
        grad_up, grad_down = approx_gradients(state.counters, t_up, t_down, n_test)
        grad_up = grad_up * scale
        grad_down = grad_down * scale
        rank_steps = _bin_rank_steps(state.gbq)
        values = state.betas.values
        state.eta_up = np.minimum(rank_steps, 1.0 - values)
        state.eta_down = np.minimum(rank_steps, values)

        down_ok = state.eta_down >= step_floor
        if not down_ok.any():
            break
        m_down = int(np.flatnonzero(down_ok)[np.argmax(grad_down[down_ok])])
        up_ok = (
            (state.eta_up >= step_floor)
            & (np.arange(len(values)) != m_down)
            & np.isfinite(grad_up)
        )
        if not up_ok.any():
            break
        m_up = int(np.flatnonzero(up_ok)[np.argmin(grad_up[up_ok])])

        tolerance = epsilon if epsilon is not None else _slope_error(state.gbq, (m_up, m_down))
        if grad_down[m_down] <= grad_up[m_up] + 2.0 * tolerance:
            break

        eta = min(
            float(state.eta_down[m_down]),
            float(state.eta_up[m_up]) * weights[m_up] / weights[m_down],
        )
        if eta < step_floor:
            break
        step_up = eta * weights[m_down] / weights[m_up]
        candidate_values = values.copy()
        candidate_values[m_up] = min(1.0, candidate_values[m_up] + step_up)
        candidate_values[m_down] = max(0.0, candidate_values[m_down] - eta)
        candidate = state.betas.with_values(candidate_values)

        cand = _evaluate(state, candidate)
        lower_c, upper_c, union_c, hull_c, bound_c = cand
        if bound_c > bound + _ACCEPT_SLACK * max(1.0, abs(bound)):
            logger.debug(
                "rejecting step at iteration %d: bound %.6f -> %.6f",
                state.iteration,
                bound,
                bound_c,
            )
            break
        state.betas = candidate
        state.iteration += 1
        lower, upper, union_mean, hull_mean, bound = lower_c, upper_c, union_c, hull_c, bound_c
        state.trace.append(TracePoint(state.iteration, union_mean, hull_mean, bound))
    return state.betas
