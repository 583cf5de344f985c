"""Datasets: synthetic generation, CSV ingestion, splitting, and label binning.

The synthetic generator draws ten exponential features, assigns each row to
one of three protected groups with probabilities (0.1, 0.2, 0.7), and builds
labels that are linear in the features for groups 0 and 2 (with noise whose
scale grows with the signal) and pure noise for group 1.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EmptyInputError, ParseError, SchemaError

SYNTHETIC_GROUP_COUNT = 3
_GROUP_SELECTOR_CUTS = (0.1, 0.3)  # uniform selector thresholds for groups 0/1/2


@dataclass(frozen=True)
class Dataset:
    """Feature matrix, continuous labels, and categorical group ids.

    All arrays share length n; every group id lies in [0, group_count).
    """

    features: np.ndarray
    labels: np.ndarray
    groups: np.ndarray
    group_count: int

    def __post_init__(self):
        features = np.asarray(self.features, dtype=float)
        labels = np.asarray(self.labels, dtype=float)
        groups = np.asarray(self.groups, dtype=int)
        if features.ndim != 2:
            raise ValueError("features must be a 2-d matrix")
        n = features.shape[0]
        if labels.shape != (n,) or groups.shape != (n,):
            raise ValueError("features, labels and groups must share length")
        if not np.all(np.isfinite(features)) or not np.all(np.isfinite(labels)):
            raise ValueError("features and labels must be finite")
        if n and (groups.min() < 0 or groups.max() >= self.group_count):
            raise ValueError("group ids must lie in [0, group_count)")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "groups", groups)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def feature_count(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class GeneratorOptions:
    """Switches for the synthetic generator.

    ``absolute_scale_noise`` replaces the signed scale multiplier with its
    absolute value, for sensitivity checks on the noise model.
    """

    feature_count: int = 10
    absolute_scale_noise: bool = False


def synthesize_labels(
    features: np.ndarray,
    groups: np.ndarray,
    eps_signal: np.ndarray,
    eps_noise_group: np.ndarray,
    eps_scale: np.ndarray,
) -> np.ndarray:
    """Combine features, groups and noise draws into labels.

    Groups 0 and 2 get ``(group + sum(features) + 10 * eps_signal) * eps_scale``;
    group 1 gets ``10 * eps_noise_group``. Split out from the generator so tests
    can inject fixed noise values.
    """
    signal = groups + features.sum(axis=1) + 10.0 * eps_signal
    labels = signal * eps_scale
    return np.where(groups == 1, 10.0 * eps_noise_group, labels)


def generate_synthetic(
    n: int, seed: int, options: GeneratorOptions = GeneratorOptions()
) -> Dataset:
    """Draw a synthetic dataset of ``n`` rows; identical output per seed."""
    if n < 0:
        raise ConfigError("n must be non-negative")
    rng = np.random.default_rng(seed)
    features = rng.exponential(1.0, size=(n, options.feature_count))
    selector = rng.uniform(0.0, 1.0, size=n)
    eps_signal = rng.standard_normal(n)
    eps_noise_group = rng.standard_normal(n)
    eps_scale = rng.standard_normal(n)
    if options.absolute_scale_noise:
        eps_scale = np.abs(eps_scale)
    groups = np.where(
        selector <= _GROUP_SELECTOR_CUTS[0],
        0,
        np.where(selector <= _GROUP_SELECTOR_CUTS[1], 1, 2),
    )
    labels = synthesize_labels(features, groups, eps_signal, eps_noise_group, eps_scale)
    return Dataset(features, labels, groups, SYNTHETIC_GROUP_COUNT)


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for CSV ingestion."""

    feature_columns: tuple[str, ...]
    label_column: str
    group_column: str


def load_csv(path, schema: CsvSchema) -> Dataset:
    """Read a comma-delimited file with a header row into a Dataset.

    Features and the label must parse as numbers; the group column must hold
    non-negative integers. Row order is preserved and the group count is
    ``1 + max(group id)``.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInputError(f"{path}: file is empty") from None
        header = [h.strip() for h in header]
        positions = {}
        for column in (*schema.feature_columns, schema.label_column, schema.group_column):
            if column not in header:
                raise SchemaError(f"{path}: column {column!r} not found in header")
            positions[column] = header.index(column)

        def cell(row_values, row_number, column):
            raw = row_values[positions[column]].strip()
            try:
                return float(raw)
            except ValueError:
                raise ParseError(
                    f"{path}: row {row_number}, column {column!r}: "
                    f"cannot parse {raw!r} as a number"
                ) from None

        features, labels, groups = [], [], []
        row_number = 0
        for row in reader:
            row_number += 1
            if not row:
                continue
            features.append([cell(row, row_number, c) for c in schema.feature_columns])
            labels.append(cell(row, row_number, schema.label_column))
            raw_group = cell(row, row_number, schema.group_column)
            if raw_group < 0 or raw_group != int(raw_group):
                raise ParseError(
                    f"{path}: row {row_number}, column {schema.group_column!r}: "
                    f"group id must be a non-negative integer, got {raw_group!r}"
                )
            groups.append(int(raw_group))

    if not labels:
        raise EmptyInputError(f"{path}: no data rows")
    group_array = np.asarray(groups, dtype=int)
    return Dataset(
        np.asarray(features, dtype=float),
        np.asarray(labels, dtype=float),
        group_array,
        int(group_array.max()) + 1,
    )


@dataclass(frozen=True)
class SplitIndices:
    """Disjoint train/calibration/test index sets covering 0..n-1."""

    train: np.ndarray
    calibration: np.ndarray
    test: np.ndarray


def split(
    dataset: Dataset, ratios: tuple[float, float, float] = (3.0, 1.0, 1.0), seed: int = 0
) -> SplitIndices:
    """Randomly partition row indices by ``ratios``; deterministic per seed.

    Sizes are floored shares of n; leftover rows go to train, then
    calibration, then test.
    """
    n = len(dataset)
    if n == 0:
        raise EmptyInputError("cannot split an empty dataset")
    if any(r < 0 for r in ratios) or sum(ratios) <= 0:
        raise ConfigError("split ratios must be non-negative with a positive sum")
    total = float(sum(ratios))
    sizes = [int(np.floor(n * r / total)) for r in ratios]
    leftover = n - sum(sizes)
    slot = 0
    while leftover > 0:
        sizes[slot % 3] += 1
        leftover -= 1
        slot += 1
    perm = np.random.default_rng(seed).permutation(n)
    train = perm[: sizes[0]]
    calibration = perm[sizes[0] : sizes[0] + sizes[1]]
    test = perm[sizes[0] + sizes[1] :]
    return SplitIndices(np.sort(train), np.sort(calibration), np.sort(test))


@dataclass(frozen=True)
class BinPartition:
    """Equal-mass label bins: ascending boundaries plus per-bin member indices.

    Bin m spans [boundaries[m], boundaries[m+1]), with the last bin closed on
    the right. Membership is fixed at construction from sorted-order cuts, so
    counts stay equal within one even under tied labels.
    """

    boundaries: np.ndarray
    member_lists: tuple[np.ndarray, ...] = field(repr=False)

    @property
    def bin_count(self) -> int:
        return len(self.boundaries) - 1

    @property
    def member_counts(self) -> np.ndarray:
        return np.asarray([len(m) for m in self.member_lists])

    @property
    def bin_widths(self) -> np.ndarray:
        return np.diff(self.boundaries)


def make_equal_mass_bins(labels, bin_count: int) -> BinPartition:
    """Cut sorted labels into ``bin_count`` bins of near-equal membership.

    Interior boundaries sit at midpoints between the sorted labels adjacent
    to each cut; the outer boundaries are the min and max label. Ties are
    broken by original index order.
    """
    labels = np.asarray(labels, dtype=float)
    n = len(labels)
    if bin_count < 1:
        raise ConfigError("bin_count must be at least 1")
    if bin_count > n:
        raise ConfigError(f"bin_count {bin_count} exceeds sample count {n}")
    order = np.argsort(labels, kind="stable")
    ordered = labels[order]
    base, extra = divmod(n, bin_count)
    counts = np.full(bin_count, base)
    counts[:extra] += 1
    cuts = np.cumsum(counts)
    boundaries = np.empty(bin_count + 1)
    boundaries[0] = ordered[0]
    boundaries[-1] = ordered[-1]
    for m, cut in enumerate(cuts[:-1], start=1):
        boundaries[m] = 0.5 * (ordered[cut - 1] + ordered[cut])
    members = tuple(
        np.sort(order[start:stop]) for start, stop in zip(np.r_[0, cuts[:-1]], cuts)
    )
    return BinPartition(boundaries, members)


def bin_of(partition: BinPartition, y):
    """0-based bin index for label(s) ``y``; out-of-range values clamp to edge bins.

    Interior boundaries belong to the bin on their right (left-closed bins).
    """
    interior = partition.boundaries[1:-1]
    idx = np.searchsorted(interior, y, side="right")
    if np.isscalar(y) or np.ndim(y) == 0:
        return int(idx)
    return idx
