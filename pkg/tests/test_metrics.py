import itertools

import numpy as np
import pytest

from bfqr.metrics import (
    EvaluationRecords,
    coverage_stats,
    energy_independence_stat,
    mean_max_gap,
    per_bin_group_coverage,
    t_statistic,
    t_statistic_u_oracle,
)


def make_records(covered, groups, labels=None, widths=None):
    covered = np.asarray(covered)
    n = len(covered)
    return EvaluationRecords(
        covered=covered,
        groups=np.asarray(groups),
        labels=np.arange(n, dtype=float) if labels is None else np.asarray(labels),
        widths=np.ones(n) if widths is None else np.asarray(widths),
        interval_counts=np.ones(n, dtype=int),
    )


def naive_u_statistic(covered, groups):
    """Straight transcription of the 4-tuple kernel for cross-checking."""
    v = list(covered)
    a = list(groups)
    sigma = len(v)
    a_values = sorted(set(a))
    v_values = sorted(set(v))

    def phi(i, j, av, vv):
        joint = 1.0 if (a[i] == av and v[i] == vv) else 0.0
        prod = (1.0 if a[i] == av else 0.0) * (1.0 if v[j] == vv else 0.0)
        return joint - prod

    total = 0.0
    count = 0
    for subset in itertools.combinations(range(sigma), 4):
        kernel = 0.0
        for perm in itertools.permutations(subset):
            kernel += sum(
                phi(perm[0], perm[1], av, vv) * phi(perm[2], perm[3], av, vv)
                for av in a_values
                for vv in v_values
            )
        total += kernel / 24.0
        count += 1
    return total / count


class TestMeanMaxGap:
    def test_two_bin_average(self):
        # bin one: group coverage 1.0 vs 0.8; bin two: identical coverage
        covered = [1, 1, 1, 1, 1, 0, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1, 1]
        groups = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1]
        records = make_records(covered, groups)
        assert mean_max_gap(records, bin_count=2) == pytest.approx(0.1)

    def test_single_group_zero(self):
        records = make_records([1, 0, 1, 0], [0, 0, 0, 0])
        assert mean_max_gap(records, bin_count=2) == 0.0

    def test_matches_independent_reimplementation(self):
        rng = np.random.default_rng(0)
        n = 500
        records = make_records(
            rng.integers(0, 2, size=n),
            rng.integers(0, 3, size=n),
            labels=rng.normal(size=n),
        )
        got = mean_max_gap(records, bin_count=5)
        # independent oracle: enumerate every (bin, group) cell by sorting
        order = np.argsort(records.labels, kind="stable")
        gaps = []
        for chunk in np.array_split(order, 5):
            rates = [
                records.covered[chunk][records.groups[chunk] == g].mean()
                for g in range(3)
                if (records.groups[chunk] == g).any()
            ]
            gaps.append(max(rates) - min(rates) if len(rates) > 1 else 0.0)
        assert got == pytest.approx(np.mean(gaps))

    def test_scale_invariance(self):
        rng = np.random.default_rng(1)
        records = make_records(
            rng.integers(0, 2, size=200),
            rng.integers(0, 3, size=200),
            labels=rng.normal(size=200),
        )
        rescaled = EvaluationRecords(
            covered=records.covered,
            groups=records.groups,
            labels=records.labels * 12.5 + 3.0,
            widths=records.widths,
            interval_counts=records.interval_counts,
        )
        assert mean_max_gap(records, 7) == mean_max_gap(rescaled, 7)

    def test_per_bin_table_shape_and_nan(self):
        records = make_records([1, 0, 1, 1], [0, 0, 0, 1], labels=[0.0, 1.0, 2.0, 3.0])
        table = per_bin_group_coverage(records, bin_count=2)
        assert table.shape == (2, 2)
        assert np.isnan(table[0, 1])  # group 1 absent from the lower bin
        assert table[1, 1] == 1.0


class TestEnergyIndependenceStat:
    def test_constant_coverage_zero(self):
        rng = np.random.default_rng(2)
        assert energy_independence_stat(rng.integers(0, 3, 12), np.ones(12)) == 0.0

    def test_constant_group_zero(self):
        rng = np.random.default_rng(3)
        assert energy_independence_stat(np.ones(12), rng.integers(0, 2, 12)) == 0.0

    def test_small_bin_rejected(self):
        with pytest.raises(ValueError):
            energy_independence_stat(np.ones(4), np.ones(4))

    def test_matches_u_oracle_pointwise(self):
        # the pairwise-distance form and the 4-tuple kernel are the same
        # statistic, so they agree sample by sample
        rng = np.random.default_rng(4)
        for _ in range(50):
            a = rng.integers(0, 3, size=8)
            v = rng.integers(0, 2, size=8)
            assert energy_independence_stat(a, v) == pytest.approx(
                t_statistic_u_oracle(v, a), abs=1e-9
            )


class TestUOracle:
    def test_constant_coverage_zero(self):
        assert t_statistic_u_oracle([1, 1, 1, 1, 1], [0, 1, 2, 0, 1]) == pytest.approx(0.0)

    def test_constant_group_zero(self):
        assert t_statistic_u_oracle([0, 1, 0, 1, 1], [2, 2, 2, 2, 2]) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_minimal_input_finite(self):
        value = t_statistic_u_oracle([0, 1, 0, 1], [0, 0, 1, 1])
        assert np.isfinite(value)

    def test_perfect_dependence_positive(self):
        v = [0, 0, 0, 0, 1, 1, 1, 1]
        assert t_statistic_u_oracle(v, v) > 0.1

    def test_size_guard(self):
        with pytest.raises(ValueError, match="capped"):
            t_statistic_u_oracle(np.ones(15), np.ones(15))
        with pytest.raises(ValueError, match="at least"):
            t_statistic_u_oracle(np.ones(3), np.ones(3))

    @pytest.mark.parametrize("sigma", [4, 5, 6])
    def test_matches_naive_transcription(self, sigma):
        rng = np.random.default_rng(5)
        for _ in range(3):
            v = rng.integers(0, 2, size=sigma)
            a = rng.integers(0, 3, size=sigma)
            assert t_statistic_u_oracle(v, a) == pytest.approx(
                naive_u_statistic(v, a), abs=1e-12
            )


class TestTStatistic:
    def test_constant_coverage_zero(self):
        rng = np.random.default_rng(6)
        records = make_records(
            np.ones(300, dtype=int),
            rng.integers(0, 3, size=300),
            labels=rng.normal(size=300),
        )
        assert t_statistic(records) == 0.0

    def test_constant_group_zero(self):
        rng = np.random.default_rng(7)
        records = make_records(
            rng.integers(0, 2, size=300),
            np.zeros(300, dtype=int),
            labels=rng.normal(size=300),
        )
        assert t_statistic(records) == 0.0

    def test_hand_assembled_from_per_bin_stats(self):
        rng = np.random.default_rng(8)
        n = 128  # ceil(128^0.4) = 7 bins
        records = make_records(
            rng.integers(0, 2, size=n),
            rng.integers(0, 2, size=n),
            labels=rng.normal(size=n),
        )
        got = t_statistic(records)
        order = np.argsort(records.labels, kind="stable")
        d = int(np.ceil(n ** 0.4))
        sizes = np.full(d, n // d)
        sizes[: n % d] += 1
        expected = 0.0
        start = 0
        for size in sizes:
            chunk = order[start : start + size]
            start += size
            if size > 4:
                expected += size * energy_independence_stat(
                    records.groups[chunk], records.covered[chunk].astype(float)
                )
        assert got == pytest.approx(expected)

    def test_subsample_deterministic_per_seed(self):
        rng = np.random.default_rng(9)
        records = make_records(
            rng.integers(0, 2, size=400),
            rng.integers(0, 3, size=400),
            labels=rng.normal(size=400),
        )
        a = t_statistic(records, repeats=5, seed=3, subsample=True)
        b = t_statistic(records, repeats=5, seed=3, subsample=True)
        c = t_statistic(records, repeats=5, seed=4, subsample=True)
        assert a == b
        assert a != c

    def test_scale_invariance(self):
        rng = np.random.default_rng(10)
        records = make_records(
            rng.integers(0, 2, size=300),
            rng.integers(0, 3, size=300),
            labels=rng.normal(size=300),
        )
        rescaled = EvaluationRecords(
            covered=records.covered,
            groups=records.groups,
            labels=records.labels * 0.01 - 40.0,
            widths=records.widths,
            interval_counts=records.interval_counts,
        )
        assert t_statistic(records) == t_statistic(rescaled)

    def test_dependence_separation(self):
        # coverage assigned by a label-driven coin (independent of group)
        # versus coverage tied to the group, on the same label marginal
        rng = np.random.default_rng(11)
        t_indep, t_dep = [], []
        for _ in range(100):
            n = 600
            labels = rng.normal(size=n)
            groups = rng.integers(0, 3, size=n)
            p = 1.0 / (1.0 + np.exp(-labels))  # label-driven coverage rate
            covered_indep = rng.uniform(size=n) < p
            covered_dep = np.where(
                groups == 0, rng.uniform(size=n) < 0.4, rng.uniform(size=n) < 0.95
            )
            t_indep.append(
                t_statistic(make_records(covered_indep, groups, labels=labels))
            )
            t_dep.append(t_statistic(make_records(covered_dep, groups, labels=labels)))
        mean_indep = np.mean(t_indep)
        se_indep = np.std(t_indep) / np.sqrt(len(t_indep))
        assert np.mean(t_dep) >= 10.0 * abs(mean_indep)
        assert abs(mean_indep) <= np.mean(t_dep) / 10.0 + 3 * se_indep


class TestCoverageStats:
    def test_all_covered(self):
        stats = coverage_stats(make_records([1, 1, 1], [0, 0, 1]))
        assert stats["marginal_coverage"] == 1.0

    def test_group_means(self):
        covered = [1, 1, 1, 1, 0, 1, 1, 1, 1, 1]
        groups = [0, 0, 0, 0, 0, 1, 1, 1, 1, 1]
        stats = coverage_stats(make_records(covered, groups))
        assert stats["group_coverage"] == pytest.approx([0.8, 1.0])

    def test_width_summary(self):
        records = make_records([1, 0], [0, 1], widths=[2.0, 4.0])
        stats = coverage_stats(records)
        assert stats["mean_width"] == pytest.approx(3.0)
        assert stats["mean_interval_count"] == 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            coverage_stats(make_records([], []))
