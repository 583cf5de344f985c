"""Coverage and independence metrics for evaluated prediction sets.

The fairness measures are rank-based: labels are cut into equal-mass bins and
coverage is compared across groups inside each bin, either directly (largest
between-group gap, averaged over bins) or through a size-weighted sum of
per-bin independence estimates between the coverage indicator and the group.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .dataset import make_equal_mass_bins

logger = logging.getLogger(__name__)

ORACLE_SAMPLE_CAP = 14


@dataclass(frozen=True)
class EvaluationRecords:
    """Per-test-point evaluation tuples: coverage indicator, group, label,
    interval width, and merged-interval count."""

    covered: np.ndarray
    groups: np.ndarray
    labels: np.ndarray
    widths: np.ndarray
    interval_counts: np.ndarray

    def __post_init__(self):
        covered = np.asarray(self.covered, dtype=bool)
        groups = np.asarray(self.groups, dtype=int)
        labels = np.asarray(self.labels, dtype=float)
        widths = np.asarray(self.widths, dtype=float)
        counts = np.asarray(self.interval_counts, dtype=int)
        n = len(covered)
        for arr in (groups, labels, widths, counts):
            if len(arr) != n:
                raise ValueError("all record arrays must share length")
        if n and widths.min() < 0:
            raise ValueError("widths must be non-negative")
        object.__setattr__(self, "covered", covered)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "interval_counts", counts)

    def __len__(self) -> int:
        return len(self.covered)

    @property
    def group_count(self) -> int:
        return int(self.groups.max()) + 1 if len(self) else 0


def _bin_memberships(labels, bin_count):
    partition = make_equal_mass_bins(labels, bin_count)
    return partition.member_lists


def mean_max_gap(records: EvaluationRecords, bin_count: int = 20) -> float:
    """Average over equal-mass label bins of the largest between-group
    coverage difference inside the bin (raw fraction, not scaled)."""
    if len(records) == 0:
        raise ValueError("mean_max_gap needs at least one record")
    gaps = []
    for m, members in enumerate(_bin_memberships(records.labels, bin_count)):
        v = records.covered[members]
        a = records.groups[members]
        present = np.unique(a)
        if len(present) < 2:
            logger.debug("evaluation bin %d holds a single group; gap set to 0", m)
            gaps.append(0.0)
            continue
        rates = [v[a == g].mean() for g in present]
        gaps.append(float(max(rates) - min(rates)))
    return float(np.mean(gaps))


def per_bin_group_coverage(
    records: EvaluationRecords, bin_count: int = 20
) -> np.ndarray:
    """Coverage rate per (evaluation bin, group); NaN where a group is absent."""
    k = records.group_count
    table = np.full((bin_count, k), np.nan)
    for m, members in enumerate(_bin_memberships(records.labels, bin_count)):
        v = records.covered[members]
        a = records.groups[members]
        for g in range(k):
            mask = a == g
            if mask.any():
                table[m, g] = v[mask].mean()
    return table


def energy_independence_stat(groups, covered) -> float:
    """Unbiased distance-covariance estimate between group and coverage
    within one bin, from pairwise 0/1 distance matrices.

    Needs at least five samples; under independence its expectation is the
    squared L2 distance between the joint and the product of marginals,
    which is zero.
    """
    a = np.asarray(groups)
    v = np.asarray(covered, dtype=float)
    sigma = len(a)
    if sigma <= 4:
        raise ValueError("need more than four samples for an unbiased estimate")
    dist_a = (a[:, None] != a[None, :]).astype(float)
    dist_v = np.abs(v[:, None] - v[None, :])
    row_a = dist_a.sum(axis=1)
    row_v = dist_v.sum(axis=1)
    s_pair = float((dist_a * dist_v).sum())
    s_rows = float(row_a @ row_v)
    s_grand = float(dist_a.sum() * dist_v.sum())
    inner = s_grand - 4.0 * s_rows + 2.0 * s_pair
    third = s_rows - s_pair
    return (
        s_pair
        + inner / ((sigma - 2.0) * (sigma - 3.0))
        - 2.0 * third / (sigma - 2.0)
    ) / (sigma * (sigma - 1.0))


def _t_over_bins(labels, groups, covered, rng=None, subsample=False) -> float:
    n = len(labels)
    d = math.ceil(n ** 0.4)
    total = 0.0
    gated = 0
    for members in _bin_memberships(labels, d):
        a = groups[members]
        v = covered[members]
        if subsample:
            take = min(len(members), rng.poisson(len(members) / 2.0))
            if take < len(members):
                keep = rng.choice(len(members), size=take, replace=False)
                a, v = a[keep], v[keep]
        sigma = len(a)
        if sigma > 4:
            total += sigma * energy_independence_stat(a, v)
        else:
            gated += 1
    if gated:
        logger.debug(
            "independence statistic: %d of %d bins below the size gate", gated, d
        )
    return total


def t_statistic(
    records: EvaluationRecords,
    repeats: int = 10,
    seed: int = 0,
    subsample: bool = False,
) -> float:
    """Size-weighted sum of per-bin independence estimates between coverage
    and group, over ceil(n^(2/5)) equal-mass label bins.

    With subsampling enabled, the evaluation is repeated on independent
    Poisson-sized subsamples and averaged; otherwise it is a single exact
    pass over every bin.
    """
    if len(records) == 0:
        raise ValueError("t_statistic needs at least one record")
    labels = records.labels
    groups = records.groups
    covered = records.covered.astype(float)
    if not subsample:
        return _t_over_bins(labels, groups, covered)
    rng = np.random.default_rng(seed)
    values = [
        _t_over_bins(labels, groups, covered, rng=rng, subsample=True)
        for _ in range(max(1, repeats))
    ]
    return float(np.mean(values))


def t_statistic_u_oracle(covered, groups) -> float:
    """Exact 4-tuple kernel estimate of the same independence distance.

    Averages the symmetrized product kernel over every ordered 4-tuple of
    distinct samples. Test oracle only: cost grows as n^4, so the input is
    capped at 14 samples.
    """
    v = np.asarray(covered, dtype=int)
    a = np.asarray(groups, dtype=int)
    sigma = len(v)
    if sigma < 4:
        raise ValueError("oracle needs at least four samples")
    if sigma > ORACLE_SAMPLE_CAP:
        raise ValueError(f"oracle input capped at {ORACLE_SAMPLE_CAP} samples")
    a_values = np.unique(a)
    v_values = np.unique(v)
    # phi[i, j, c] = 1[A_i=a_c, V_i=v_c] - 1[A_i=a_c] 1[V_j=v_c]
    ind_a = a[:, None] == a_values[None, :]
    ind_v = v[:, None] == v_values[None, :]
    joint = (ind_a[:, :, None] & ind_v[:, None, :]).astype(float)
    cross = ind_a[:, None, :, None] & ind_v[None, :, None, :]
    phi = joint[:, None, :, :] - cross.astype(float)
    phi = phi.reshape(sigma, sigma, -1)
    # pair_products[i, j, k, l] = sum_c phi[i, j, c] phi[k, l, c]
    pair_products = np.tensordot(phi, phi, axes=([2], [2]))
    tuples = np.asarray(list(itertools.permutations(range(sigma), 4)))
    total = pair_products[tuples[:, 0], tuples[:, 1], tuples[:, 2], tuples[:, 3]].sum()
    return float(total / len(tuples))


def coverage_stats(records: EvaluationRecords) -> dict:
    """Marginal and per-group coverage plus width summaries (raw fractions)."""
    if len(records) == 0:
        raise ValueError("coverage_stats needs at least one record")
    per_group = [
        float(records.covered[records.groups == a].mean())
        if np.any(records.groups == a)
        else float("nan")
        for a in range(records.group_count)
    ]
    return {
        "marginal_coverage": float(records.covered.mean()),
        "group_coverage": per_group,
        "mean_width": float(records.widths.mean()),
        "mean_interval_count": float(records.interval_counts.mean()),
    }


@dataclass(frozen=True)
class MetricsReport:
    """Full evaluation of one method on one test split (raw fractions; the
    report layer scales coverage-style figures by 100 for tables)."""

    marginal_coverage: float
    group_coverage: tuple[float, ...]
    mean_width: float
    mean_hull_width: float
    mean_max_gap: float
    t_statistic: float
    t_repeats: int
    per_bin_coverage: np.ndarray
    mean_interval_count: float
    fallback_count: int

    def as_dict(self) -> dict[str, float]:
        """Flat metric mapping used for per-seed aggregation."""
        values = {
            "marginal_coverage": self.marginal_coverage,
            "mean_width": self.mean_width,
            "mean_hull_width": self.mean_hull_width,
            "mean_max_gap": self.mean_max_gap,
            "t_stat": self.t_statistic,
            "mean_interval_count": self.mean_interval_count,
            "fallback_lookups": float(self.fallback_count),
        }
        for a, value in enumerate(self.group_coverage):
            values[f"coverage_a{a}"] = value
        return values


def evaluate_records(
    records: EvaluationRecords,
    *,
    evaluation_bins: int = 20,
    t_repeats: int = 10,
    t_seed: int = 0,
    t_subsample: bool = False,
    mean_hull_width: float | None = None,
    fallback_count: int = 0,
) -> MetricsReport:
    """Assemble the complete metric set for one batch of evaluated points.

    ``mean_hull_width`` defaults to the union width, which is exact for
    single-interval prediction sets.
    """
    stats = coverage_stats(records)
    return MetricsReport(
        marginal_coverage=stats["marginal_coverage"],
        group_coverage=tuple(stats["group_coverage"]),
        mean_width=stats["mean_width"],
        mean_hull_width=(
            stats["mean_width"] if mean_hull_width is None else float(mean_hull_width)
        ),
        mean_max_gap=mean_max_gap(records, evaluation_bins),
        t_statistic=t_statistic(
            records, repeats=t_repeats, seed=t_seed, subsample=t_subsample
        ),
        t_repeats=t_repeats,
        per_bin_coverage=per_bin_group_coverage(records, evaluation_bins),
        mean_interval_count=stats["mean_interval_count"],
        fallback_count=fallback_count,
    )
