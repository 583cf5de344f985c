"""Per-(group, bin) conformity quantiles and binned prediction-set construction.

A prediction set is assembled bin by bin: each label bin contributes the slice
of the calibrated interval that falls inside it, where the calibration offset
is the bin- and group-specific score quantile at that bin's coverage target.
The union of slices is the disjoint-interval prediction set; its convex hull
is the single-interval variant.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import BinPartition
from .intervals import IntervalUnion
from .quantile_model import QuantileModel

logger = logging.getLogger(__name__)

CONSTRAINT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ConformityRecords:
    """Calibration conformity scores with their group and bin assignments."""

    scores: np.ndarray
    groups: np.ndarray
    bins: np.ndarray
    indices: np.ndarray

    def __len__(self) -> int:
        return len(self.scores)

    @classmethod
    def from_calibration(cls, scores, groups, partition: BinPartition) -> "ConformityRecords":
        """Assign each calibration sample the bin it was cut into.

        Uses the partition's stored member lists, so tied labels keep the
        equal-mass assignment rather than a boundary lookup.
        """
        scores = np.asarray(scores, dtype=float)
        groups = np.asarray(groups, dtype=int)
        n = len(scores)
        bins = np.full(n, -1, dtype=int)
        for m, members in enumerate(partition.member_lists):
            bins[members] = m
        if np.any(bins < 0):
            raise ValueError("partition member lists do not cover all samples")
        return cls(scores, groups, bins, np.arange(n))


@dataclass(frozen=True)
class GroupBinQuantiles:
    """Sorted conformity-score pools for every (group, bin) cell.

    ``pooled`` holds the group-blind per-bin pools used as a fallback when a
    cell is empty.
    """

    cells: tuple[tuple[np.ndarray, ...], ...]
    pooled: tuple[np.ndarray, ...]
    counts: np.ndarray = field(repr=False)

    @property
    def group_count(self) -> int:
        return len(self.cells)

    @property
    def bin_count(self) -> int:
        return len(self.pooled)

    def cell(self, group: int, bin_index: int) -> np.ndarray:
        return self.cells[group][bin_index]


def build_group_bin_quantiles(
    records: ConformityRecords, group_count: int, bin_count: int
) -> GroupBinQuantiles:
    """Bucket calibration scores into sorted (group, bin) cells."""
    cells = []
    counts = np.zeros((group_count, bin_count), dtype=int)
    for a in range(group_count):
        row = []
        in_group = records.groups == a
        for m in range(bin_count):
            cell = np.sort(records.scores[in_group & (records.bins == m)])
            counts[a, m] = len(cell)
            row.append(cell)
        cells.append(tuple(row))
    pooled = tuple(
        np.sort(records.scores[records.bins == m]) for m in range(bin_count)
    )
    return GroupBinQuantiles(tuple(cells), pooled, counts)


def _collapse_sentinel(cell: np.ndarray) -> float:
    # strictly below the cell minimum so a zero coverage target yields a band
    # narrower than every calibration score
    low = float(cell[0])
    return low - 1e-9 * max(1.0, abs(low))


def cell_quantile(cell: np.ndarray, beta: float, *, clamp: bool = False) -> float:
    """Rank quantile of one sorted score pool.

    beta = 0 collapses below the minimum so the calibrated band can vanish.
    When the rank ceil(beta * (n + 1)) exceeds n, the pool has no order
    statistic that can honor the target, and the offset becomes infinite so
    the calibrated band swallows the whole bin; that convention is what keeps
    the per-cell coverage sandwich exact at targets near 1. ``clamp=True``
    serves the top score instead (used for finite difference slopes).
    """
    if beta <= 0.0:
        return _collapse_sentinel(cell)
    n = len(cell)
    k = math.ceil(beta * (n + 1))
    if k > n:
        if clamp:
            return float(cell[-1])
        return math.inf
    return float(cell[max(k, 1) - 1])


def lookup_g(gbq: GroupBinQuantiles, group: int, bin_index: int, beta: float) -> float:
    """Score quantile of cell (group, bin) at coverage target ``beta``.

    Empty cells fall back to the pooled scores of the bin, with a warning.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    cell = gbq.cell(group, bin_index)
    if len(cell) == 0:
        logger.warning(
            "empty quantile cell group=%d bin=%d; falling back to pooled bin scores",
            group,
            bin_index,
        )
        cell = gbq.pooled[bin_index]
        if len(cell) == 0:
            raise ValueError(f"bin {bin_index} has no calibration scores at all")
    return cell_quantile(cell, beta)


def g_matrix(gbq: GroupBinQuantiles, beta_values) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate every cell's quantile at its bin's beta.

    Returns a (group_count, bin_count) matrix plus a boolean mask of the cells
    that used the pooled fallback.
    """
    beta_values = np.asarray(beta_values, dtype=float)
    out = np.empty((gbq.group_count, gbq.bin_count))
    fallback = np.zeros((gbq.group_count, gbq.bin_count), dtype=bool)
    for a in range(gbq.group_count):
        for m in range(gbq.bin_count):
            cell = gbq.cell(a, m)
            if len(cell) == 0:
                fallback[a, m] = True
                cell = gbq.pooled[m]
            out[a, m] = cell_quantile(cell, float(beta_values[m]))
    return out, fallback


@dataclass(frozen=True)
class BetaVector:
    """Per-bin coverage targets whose weighted mean is pinned to a target.

    Weights default to uniform (equal-mass bins); the unequal-mass extension
    supplies weights proportional to bin populations.
    """

    values: np.ndarray
    target_mean: float
    weights: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if self.weights is None:
            weights = np.full(len(values), 1.0 / len(values))
        else:
            weights = np.asarray(self.weights, dtype=float)
            if weights.shape != values.shape or np.any(weights <= 0):
                raise ValueError("weights must be positive and match values")
            weights = weights / weights.sum()
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise ValueError("coverage targets must lie in [0, 1]")
        if abs(float(weights @ values) - self.target_mean) > CONSTRAINT_TOLERANCE:
            raise ValueError(
                f"weighted mean {float(weights @ values)!r} misses target "
                f"{self.target_mean!r}"
            )
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "weights", weights)

    def __len__(self) -> int:
        return len(self.values)

    def with_values(self, values) -> "BetaVector":
        return replace(self, values=np.asarray(values, dtype=float))


def project_to_constraint(raw, target: float, weights=None) -> np.ndarray:
    """Clip to [0, 1] after the uniform additive shift that pins the weighted
    mean to ``target``; the shift is found by bisection, then the residual is
    spread over the unsaturated entries."""
    raw = np.asarray(raw, dtype=float)
    if weights is None:
        weights = np.full(len(raw), 1.0 / len(raw))
    else:
        weights = np.asarray(weights, dtype=float)
        weights = weights / weights.sum()
    if not 0.0 <= target <= 1.0:
        raise ValueError("target mean must lie in [0, 1]")

    def shifted(c):
        return np.clip(raw + c, 0.0, 1.0)

    lo, hi = -1.0 - raw.max(), 1.0 - raw.min() + 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(weights @ shifted(mid)) < target:
            lo = mid
        else:
            hi = mid
    values = shifted(hi)
    free = (values > 0.0) & (values < 1.0)
    residual = target - float(weights @ values)
    if np.any(free) and residual != 0.0:
        values[free] += residual / weights[free].sum()
        values = np.clip(values, 0.0, 1.0)
    return values


def subinterval_bounds(
    q_lo, q_hi, groups, betas: BetaVector, gbq: GroupBinQuantiles, partition: BinPartition
) -> tuple[np.ndarray, np.ndarray, int]:
    """Per-bin slice endpoints of the calibrated interval for each test row.

    Returns (lower, upper) of shape (n, bin_count) where a slice is empty iff
    lower > upper, plus the number of row-cell lookups that used the pooled
    fallback.
    """
    q_lo = np.atleast_1d(np.asarray(q_lo, dtype=float))
    q_hi = np.atleast_1d(np.asarray(q_hi, dtype=float))
    groups = np.atleast_1d(np.asarray(groups, dtype=int))
    g, fallback = g_matrix(gbq, betas.values)
    per_row = g[groups]
    lower = np.maximum(partition.boundaries[:-1][None, :], q_lo[:, None] - per_row)
    upper = np.minimum(partition.boundaries[1:][None, :], q_hi[:, None] + per_row)
    fallback_lookups = int(fallback[groups].sum())
    return lower, upper, fallback_lookups


def union_widths(lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Total width of each row's union of slices."""
    return np.clip(upper - lower, 0.0, None).sum(axis=1)


def hull_spans(lower: np.ndarray, upper: np.ndarray):
    """Hull endpoints and boundary-bin indices per row.

    Returns (hull_lo, hull_hi, first_bin, last_bin, nonempty_row); rows whose
    union is empty get first_bin = last_bin = -1 and zero hull width.
    """
    nonempty = upper >= lower
    any_row = nonempty.any(axis=1)
    first = np.where(any_row, nonempty.argmax(axis=1), -1)
    last = np.where(
        any_row, nonempty.shape[1] - 1 - nonempty[:, ::-1].argmax(axis=1), -1
    )
    rows = np.arange(lower.shape[0])
    hull_lo = np.where(any_row, lower[rows, first], 0.0)
    hull_hi = np.where(any_row, upper[rows, last], 0.0)
    return hull_lo, hull_hi, first, last, any_row


def covered_points(lower: np.ndarray, upper: np.ndarray, labels) -> np.ndarray:
    """Whether each row's label falls inside its union (closed endpoints)."""
    labels = np.atleast_1d(np.asarray(labels, dtype=float))[:, None]
    return ((lower <= labels) & (labels <= upper)).any(axis=1)


def interval_counts(lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Number of merged intervals per row; slices touching at a shared bin
    boundary count as one."""
    nonempty = upper >= lower
    prev_nonempty = np.zeros_like(nonempty)
    prev_nonempty[:, 1:] = nonempty[:, :-1]
    touches_prev = np.zeros_like(nonempty)
    touches_prev[:, 1:] = upper[:, :-1] >= lower[:, 1:]
    starts = nonempty & ~(prev_nonempty & touches_prev)
    return starts.sum(axis=1)


def row_interval_union(lower_row: np.ndarray, upper_row: np.ndarray) -> IntervalUnion:
    """Materialize one row of slice bounds as a merged interval union."""
    return IntervalUnion.from_pairs(zip(lower_row, upper_row))


def bfqr_interval(
    x,
    group: int,
    betas: BetaVector,
    gbq: GroupBinQuantiles,
    partition: BinPartition,
    model: QuantileModel,
) -> IntervalUnion:
    """Binned prediction set for one feature vector and group id."""
    q_lo, q_hi = model.predict_interval(x)
    lower, upper, _ = subinterval_bounds([q_lo], [q_hi], [group], betas, gbq, partition)
    return row_interval_union(lower[0], upper[0])
