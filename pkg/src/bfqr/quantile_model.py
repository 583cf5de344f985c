"""Affine quantile-regression base model with two pinball-loss heads.

The model is deliberately simple: one affine head per quantile level, trained
by seeded mini-batch subgradient descent on standardized features. The
conformal layers downstream correct whatever miscalibration remains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError

MODEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class FitOptions:
    learning_rate: float = 0.05
    iterations: int = 2000
    batch_size: int = 256
    seed: int = 0


@dataclass(frozen=True)
class TrainingInfo:
    iterations: int
    final_loss: float


@dataclass(frozen=True)
class QuantileModel:
    """Two affine quantile heads plus the feature standardization they assume.

    Weight vectors store the intercept first. ``levels`` are the (lower,
    upper) quantile levels, strictly ordered in (0, 1).
    """

    lower_weights: np.ndarray
    upper_weights: np.ndarray
    levels: tuple[float, float]
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    training: TrainingInfo

    def __post_init__(self):
        lo, hi = self.levels
        if not (0.0 < lo < hi < 1.0):
            raise ValueError("levels must satisfy 0 < lower < upper < 1")
        for w in (self.lower_weights, self.upper_weights):
            if not np.all(np.isfinite(w)):
                raise ValueError("model weights must be finite")

    @property
    def feature_count(self) -> int:
        return len(self.lower_weights) - 1

    def _standardize(self, features: np.ndarray) -> np.ndarray:
        return (features - self.feature_mean) / self.feature_scale

    def predict_batch(self, features) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate both heads on an (n, p) matrix; returns (q_lo, q_hi).

        Crossing heads are monotonized pairwise so q_lo <= q_hi always holds.
        """
        features = np.asarray(features, dtype=float)
        if features.ndim != 2 or features.shape[1] != self.feature_count:
            raise ValueError(
                f"expected (n, {self.feature_count}) features, got {features.shape}"
            )
        z = self._standardize(features)
        raw_lo = self.lower_weights[0] + z @ self.lower_weights[1:]
        raw_hi = self.upper_weights[0] + z @ self.upper_weights[1:]
        return np.minimum(raw_lo, raw_hi), np.maximum(raw_lo, raw_hi)

    def predict_interval(self, x) -> tuple[float, float]:
        """Evaluate both heads at a single feature vector."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 1 or len(x) != self.feature_count:
            raise ValueError(f"expected a length-{self.feature_count} vector, got {x.shape}")
        q_lo, q_hi = self.predict_batch(x[None, :])
        return float(q_lo[0]), float(q_hi[0])


def pinball_loss(prediction, y, tau):
    """Asymmetric absolute loss whose minimizer is the tau-quantile."""
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    prediction = np.asarray(prediction, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = y - prediction
    return np.where(diff >= 0, tau * diff, (tau - 1.0) * diff)


def _fit_head(z, y, tau, options: FitOptions, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n = len(y)
    weights = np.zeros(z.shape[1] + 1)
    weights[0] = np.quantile(y, tau)
    batch = min(options.batch_size, n)
    hold = int(0.6 * options.iterations)
    for t in range(options.iterations):
        # full-rate phase reaches the optimum; the linear decay to zero then
        # damps the terminal oscillation of the subgradient
        if t < hold:
            step = options.learning_rate
        else:
            step = options.learning_rate * (
                1.0 - (t - hold) / max(options.iterations - hold, 1)
            )
        idx = rng.integers(0, n, size=batch)
        zb, yb = z[idx], y[idx]
        pred = weights[0] + zb @ weights[1:]
        g = np.where(yb >= pred, -tau, 1.0 - tau)
        weights[0] -= step * g.mean()
        weights[1:] -= step * (zb * g[:, None]).mean(axis=0)
        if not np.all(np.isfinite(weights)):
            raise DivergenceError(
                "training diverged to non-finite weights; try a smaller learning rate"
            )
    return weights


def fit(
    features,
    labels,
    levels: tuple[float, float] = (0.05, 0.95),
    options: FitOptions = FitOptions(),
) -> QuantileModel:
    """Train both quantile heads; deterministic per ``options.seed``."""
    features = np.asarray(features, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if features.ndim != 2 or len(features) != len(labels) or len(labels) == 0:
        raise ValueError("features must be (n, p) with matching non-empty labels")
    lo, hi = levels
    if not (0.0 < lo < hi < 1.0):
        raise ValueError("levels must satisfy 0 < lower < upper < 1")
    mean = features.mean(axis=0)
    scale = features.std(axis=0)
    scale = np.where(scale == 0.0, 1.0, scale)
    z = (features - mean) / scale
    lower = _fit_head(z, labels, lo, options, options.seed)
    upper = _fit_head(z, labels, hi, options, options.seed + 1)
    pred_lo = lower[0] + z @ lower[1:]
    pred_hi = upper[0] + z @ upper[1:]
    with np.errstate(over="ignore", invalid="ignore"):
        # overflow here is exactly what the finiteness check below rejects
        final_loss = float(
            pinball_loss(pred_lo, labels, lo).mean()
            + pinball_loss(pred_hi, labels, hi).mean()
        )
    if not np.isfinite(final_loss):
        raise DivergenceError("training loss is non-finite; try a smaller learning rate")
    return QuantileModel(
        lower_weights=lower,
        upper_weights=upper,
        levels=levels,
        feature_mean=mean,
        feature_scale=scale,
        training=TrainingInfo(options.iterations, final_loss),
    )


def save_model(model: QuantileModel, path) -> None:
    """Write a model as line-oriented ``key value...`` text.

    Floats are written with repr so a load round-trips bitwise.
    """

    def fmt(values):
        return " ".join(repr(float(v)) for v in np.atleast_1d(values))

    lines = [
        f"format_version {MODEL_FORMAT_VERSION}",
        f"levels {fmt(model.levels)}",
        f"feature_mean {fmt(model.feature_mean)}",
        f"feature_scale {fmt(model.feature_scale)}",
        f"lower_weights {fmt(model.lower_weights)}",
        f"upper_weights {fmt(model.upper_weights)}",
        f"iterations {model.training.iterations}",
        f"final_loss {repr(model.training.final_loss)}",
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> QuantileModel:
    """Inverse of :func:`save_model`."""
    entries = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, _, rest = line.partition(" ")
            entries[key] = rest
    version = int(entries["format_version"])
    if version != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {version}")

    def arr(key):
        return np.asarray([float(v) for v in entries[key].split()])

    levels = arr("levels")
    return QuantileModel(
        lower_weights=arr("lower_weights"),
        upper_weights=arr("upper_weights"),
        levels=(float(levels[0]), float(levels[1])),
        feature_mean=arr("feature_mean"),
        feature_scale=arr("feature_scale"),
        training=TrainingInfo(int(entries["iterations"]), float(entries["final_loss"])),
    )
