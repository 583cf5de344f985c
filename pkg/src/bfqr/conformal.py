"""Conformity scores, finite-sample conformal quantiles, and CQR baselines.

Covers split CQR, the group-conditional variant (one score pool per protected
group), and the label-conditional variant (one score pool per label bin, with
bin-intersected sub-intervals).
"""

from __future__ import annotations

import math

import numpy as np

from .dataset import BinPartition
from .errors import ConfigError, EmptyInputError, MissingGroupError
from .intervals import IntervalUnion
from .quantile_model import QuantileModel


def conformity_score(q_lo, q_hi, y):
    """Score max(q_lo - y, y - q_hi): negative inside the interval, distance
    to the nearer violated bound outside."""
    q_lo = np.asarray(q_lo, dtype=float)
    q_hi = np.asarray(q_hi, dtype=float)
    if np.any(q_lo > q_hi):
        raise ValueError("conformity_score requires q_lo <= q_hi")
    y = np.asarray(y, dtype=float)
    out = np.maximum(q_lo - y, y - q_hi)
    if out.ndim == 0:
        return float(out)
    return out


def rank_of(level: float, n: int) -> int:
    """1-based order-statistic rank ceil(level * (n + 1)), clamped to [1, n]."""
    k = math.ceil(level * (n + 1))
    return min(max(k, 1), n)


def conformal_quantile(scores, level: float, *, assume_sorted: bool = False) -> float:
    """The rank_of(level, n)-th smallest score.

    At level (1 - alpha) this is the split-conformal calibration quantile.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise EmptyInputError("conformal_quantile needs at least one score")
    ordered = scores if assume_sorted else np.sort(scores)
    return float(ordered[rank_of(level, len(ordered)) - 1])


def cqr_predict(model: QuantileModel, cal_scores, alpha: float, x) -> IntervalUnion:
    """Split-CQR interval: the model interval widened by the pooled quantile."""
    offset = conformal_quantile(cal_scores, 1.0 - alpha)
    q_lo, q_hi = model.predict_interval(x)
    return IntervalUnion.single(q_lo - offset, q_hi + offset)


def gcqr_predict(
    model: QuantileModel, group_scores, alpha: float, x, group: int
) -> IntervalUnion:
    """Group-conditional CQR: the widening quantile comes from the point's own
    group's calibration scores."""
    if group < 0 or group >= len(group_scores) or len(group_scores[group]) == 0:
        raise MissingGroupError(f"group {group} has no calibration scores")
    offset = conformal_quantile(group_scores[group], 1.0 - alpha)
    q_lo, q_hi = model.predict_interval(x)
    return IntervalUnion.single(q_lo - offset, q_hi + offset)


def lcqr_predict(
    model: QuantileModel, partition: BinPartition, bin_scores, alpha: float, x
) -> IntervalUnion:
    """Label-conditional CQR: per-bin pooled quantiles, bin-clipped sub-intervals.

    Each bin contributes its slice of the calibrated interval; the prediction
    set is the merged union over bins.
    """
    if len(bin_scores) != partition.bin_count:
        raise ConfigError("bin_scores must have one pool per bin")
    for m, pool in enumerate(bin_scores):
        if len(pool) == 0:
            raise ConfigError(f"bin {m} has no calibration scores")
    q_lo, q_hi = model.predict_interval(x)
    bounds = partition.boundaries
    pairs = []
    for m, pool in enumerate(bin_scores):
        offset = conformal_quantile(pool, 1.0 - alpha)
        lower = max(bounds[m], q_lo - offset)
        upper = min(bounds[m + 1], q_hi + offset)
        pairs.append((lower, upper))
    return IntervalUnion.from_pairs(pairs)


def cqr_bounds(
    model: QuantileModel, cal_scores, alpha: float, features
) -> tuple[np.ndarray, np.ndarray]:
    """Batch CQR endpoints over a feature matrix; rows with lower > upper are
    empty prediction sets."""
    offset = conformal_quantile(cal_scores, 1.0 - alpha)
    q_lo, q_hi = model.predict_batch(features)
    return q_lo - offset, q_hi + offset


def gcqr_bounds(
    model: QuantileModel, group_scores, alpha: float, features, groups
) -> tuple[np.ndarray, np.ndarray]:
    """Batch group-conditional CQR endpoints."""
    groups = np.asarray(groups, dtype=int)
    offsets = np.empty(len(group_scores))
    for a, pool in enumerate(group_scores):
        if len(pool) == 0:
            if np.any(groups == a):
                raise MissingGroupError(f"group {a} has no calibration scores")
            offsets[a] = np.nan
            continue
        offsets[a] = conformal_quantile(pool, 1.0 - alpha)
    if groups.size and (groups.min() < 0 or groups.max() >= len(group_scores)):
        raise MissingGroupError("test rows reference a group absent from calibration")
    q_lo, q_hi = model.predict_batch(features)
    per_row = offsets[groups]
    return q_lo - per_row, q_hi + per_row


def split_scores_by_group(scores, groups, group_count: int) -> list[np.ndarray]:
    """Sorted per-group score pools."""
    scores = np.asarray(scores, dtype=float)
    groups = np.asarray(groups, dtype=int)
    return [np.sort(scores[groups == a]) for a in range(group_count)]


def split_scores_by_bin(scores, bin_index, bin_count: int) -> list[np.ndarray]:
    """Sorted per-bin score pools."""
    scores = np.asarray(scores, dtype=float)
    bin_index = np.asarray(bin_index, dtype=int)
    return [np.sort(scores[bin_index == m]) for m in range(bin_count)]
