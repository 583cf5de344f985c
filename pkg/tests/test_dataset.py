import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bfqr.dataset import (
    CsvSchema,
    Dataset,
    GeneratorOptions,
    bin_of,
    generate_synthetic,
    load_csv,
    make_equal_mass_bins,
    split,
    synthesize_labels,
)
from bfqr.errors import ConfigError, EmptyInputError, ParseError, SchemaError


class TestGenerateSynthetic:
    def test_group_marginals_large_sample(self):
        data = generate_synthetic(100_000, seed=0)
        fractions = [(data.groups == a).mean() for a in range(3)]
        assert abs(fractions[0] - 0.1) < 0.01
        assert abs(fractions[1] - 0.2) < 0.01
        assert abs(fractions[2] - 0.7) < 0.01

    def test_group_marginals_within_three_binomial_se(self):
        n = 200_000
        data = generate_synthetic(n, seed=7)
        for a, p in enumerate((0.1, 0.2, 0.7)):
            se = np.sqrt(p * (1 - p) / n)
            assert abs((data.groups == a).mean() - p) <= 3 * se

    def test_empty_dataset(self):
        data = generate_synthetic(0, seed=3)
        assert len(data) == 0
        assert data.group_count == 3

    def test_negative_count_rejected(self):
        with pytest.raises(ConfigError):
            generate_synthetic(-1, seed=0)

    def test_injected_noise_linear_group_equals_feature_sum(self):
        features = np.array([[0.5, 1.5, 2.0]])
        zeros = np.zeros(1)
        ones = np.ones(1)
        labels = synthesize_labels(features, np.array([0]), zeros, zeros, ones)
        assert labels[0] == pytest.approx(4.0)

    def test_injected_noise_group_one_is_pure_noise(self):
        features = np.array([[9.0, 9.0]])
        labels = synthesize_labels(
            features, np.array([1]), np.zeros(1), np.array([0.25]), np.ones(1)
        )
        assert labels[0] == pytest.approx(2.5)

    def test_injected_noise_group_two_adds_group_id(self):
        features = np.array([[1.0, 2.0]])
        labels = synthesize_labels(
            features, np.array([2]), np.zeros(1), np.zeros(1), np.ones(1)
        )
        assert labels[0] == pytest.approx(5.0)

    def test_seeded_determinism_bitwise(self):
        a = generate_synthetic(500, seed=11)
        b = generate_synthetic(500, seed=11)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)
        assert np.array_equal(a.groups, b.groups)

    def test_absolute_scale_noise_switch_changes_labels(self):
        signed = generate_synthetic(200, seed=5)
        folded = generate_synthetic(
            200, seed=5, options=GeneratorOptions(absolute_scale_noise=True)
        )
        assert np.array_equal(signed.features, folded.features)
        assert np.array_equal(signed.groups, folded.groups)
        linear = signed.groups != 1
        assert not np.array_equal(signed.labels[linear], folded.labels[linear])
        assert np.array_equal(signed.labels[~linear], folded.labels[~linear])


class TestDatasetValidation:
    def test_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((3, 2)), np.zeros(2), np.zeros(3, dtype=int), 1)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            Dataset(np.full((1, 1), np.nan), np.zeros(1), np.zeros(1, dtype=int), 1)

    def test_rejects_out_of_range_group(self):
        with pytest.raises(ValueError):
            Dataset(np.zeros((1, 1)), np.zeros(1), np.array([5]), 2)


class TestLoadCsv:
    SCHEMA = CsvSchema(("x1", "x2"), "y", "a")

    def write(self, tmp_path, text):
        path = tmp_path / "data.csv"
        path.write_text(text)
        return path

    def test_three_row_file(self, tmp_path):
        path = self.write(tmp_path, "x1,x2,y,a\n1,2,3,0\n4,5,6,1\n7,8,9,1\n")
        data = load_csv(path, self.SCHEMA)
        assert len(data) == 3
        assert data.feature_count == 2
        assert data.group_count == 2
        assert np.array_equal(data.labels, [3.0, 6.0, 9.0])
        assert np.array_equal(data.features[2], [7.0, 8.0])

    def test_missing_column_named_in_error(self, tmp_path):
        path = self.write(tmp_path, "x1,x2,y,a\n1,2,3,0\n")
        with pytest.raises(SchemaError, match="salary"):
            load_csv(path, CsvSchema(("x1", "x2"), "salary", "a"))

    def test_unparseable_cell_cites_row(self, tmp_path):
        path = self.write(tmp_path, "x1,x2,y,a\n1,2,3,0\n4,5,abc,1\n")
        with pytest.raises(ParseError, match="row 2"):
            load_csv(path, self.SCHEMA)

    def test_empty_file(self, tmp_path):
        path = self.write(tmp_path, "")
        with pytest.raises(EmptyInputError):
            load_csv(path, self.SCHEMA)

    def test_header_only_file(self, tmp_path):
        path = self.write(tmp_path, "x1,x2,y,a\n")
        with pytest.raises(EmptyInputError):
            load_csv(path, self.SCHEMA)

    def test_fractional_group_rejected(self, tmp_path):
        path = self.write(tmp_path, "x1,x2,y,a\n1,2,3,0.5\n")
        with pytest.raises(ParseError, match="group"):
            load_csv(path, self.SCHEMA)


class TestSplit:
    def test_desk_scale_sizes(self):
        data = generate_synthetic(5000, seed=0)
        parts = split(data, (3, 1, 1), seed=0)
        assert len(parts.train) == 3000
        assert len(parts.calibration) == 1000
        assert len(parts.test) == 1000

    def test_same_seed_identical(self):
        data = generate_synthetic(100, seed=0)
        a = split(data, (3, 1, 1), seed=9)
        b = split(data, (3, 1, 1), seed=9)
        assert np.array_equal(a.train, b.train)
        assert np.array_equal(a.calibration, b.calibration)
        assert np.array_equal(a.test, b.test)

    def test_tiny_dataset_floor_then_remainder(self):
        data = generate_synthetic(5, seed=0)
        parts = split(data, (3, 1, 1), seed=1)
        assert (len(parts.train), len(parts.calibration), len(parts.test)) == (3, 1, 1)

    def test_all_zero_ratios_rejected(self):
        data = generate_synthetic(10, seed=0)
        with pytest.raises(ConfigError):
            split(data, (0, 0, 0), seed=0)

    def test_empty_dataset_rejected(self):
        with pytest.raises(EmptyInputError):
            split(generate_synthetic(0, seed=0), (3, 1, 1), seed=0)

    @given(
        n=st.integers(min_value=1, max_value=300),
        seed=st.integers(min_value=0, max_value=2**31),
        ratios=st.tuples(
            st.floats(0.0, 10.0), st.floats(0.0, 10.0), st.floats(0.0, 10.0)
        ).filter(lambda r: sum(r) > 0.1),
    )
    @settings(max_examples=60, deadline=None)
    def test_partition_property(self, n, seed, ratios):
        data = generate_synthetic(n, seed=0)
        parts = split(data, ratios, seed=seed)
        merged = np.concatenate([parts.train, parts.calibration, parts.test])
        assert len(merged) == n
        assert len(np.unique(merged)) == n
        total = sum(ratios)
        for got, ratio in zip(
            (parts.train, parts.calibration, parts.test), ratios
        ):
            assert abs(len(got) - n * ratio / total) < 3


class TestEqualMassBins:
    def test_symmetric_cuts(self):
        part = make_equal_mass_bins([1, 2, 3, 4, 5, 6], 3)
        assert list(part.member_counts) == [2, 2, 2]
        assert part.boundaries == pytest.approx([1.0, 2.5, 4.5, 6.0])

    def test_single_bin(self):
        part = make_equal_mass_bins([3.0, 1.0, 2.0], 1)
        assert part.bin_count == 1
        assert part.boundaries == pytest.approx([1.0, 3.0])
        assert list(part.member_counts) == [3]

    def test_uniform_thousand_exact_fifty_per_bin(self):
        labels = np.random.default_rng(0).uniform(size=1000)
        part = make_equal_mass_bins(labels, 20)
        # brute-force recount: position in the sorted order decides the bin
        order = np.argsort(labels, kind="stable")
        counts = np.zeros(20, dtype=int)
        for rank_position in range(1000):
            counts[rank_position // 50] += 1
        assert np.array_equal(part.member_counts, counts)
        assert np.all(part.member_counts == 50)

    def test_too_many_bins_rejected(self):
        with pytest.raises(ConfigError):
            make_equal_mass_bins([1.0, 2.0], 3)

    @given(
        labels=st.lists(
            st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=200
        ),
        bins=st.integers(min_value=1, max_value=30),
    )
    @settings(max_examples=80, deadline=None)
    def test_equal_mass_and_partition_properties(self, labels, bins):
        if bins > len(labels):
            bins = len(labels)
        part = make_equal_mass_bins(labels, bins)
        counts = part.member_counts
        assert counts.max() - counts.min() <= 1
        assert counts.sum() == len(labels)
        merged = np.concatenate(part.member_lists)
        assert len(np.unique(merged)) == len(labels)
        assert part.boundaries[0] == min(labels)
        assert part.boundaries[-1] == max(labels)


class TestBinOf:
    PART = make_equal_mass_bins([1, 2, 3, 4, 5, 6], 3)  # boundaries 1, 2.5, 4.5, 6

    def test_containment(self):
        assert bin_of(self.PART, 3.0) == 1

    def test_boundary_goes_right(self):
        assert bin_of(self.PART, 2.5) == 1

    def test_clamps_above(self):
        assert bin_of(self.PART, 100.0) == 2

    def test_clamps_below(self):
        assert bin_of(self.PART, -10.0) == 0

    def test_vectorized(self):
        got = bin_of(self.PART, np.array([0.0, 2.5, 3.0, 6.0, 99.0]))
        assert np.array_equal(got, [0, 1, 1, 2, 2])

    def test_members_consistent_with_lookup_when_no_ties(self):
        labels = np.random.default_rng(1).normal(size=97)
        part = make_equal_mass_bins(labels, 7)
        for m, members in enumerate(part.member_lists):
            assert np.all(bin_of(part, labels[members]) == m)
