import numpy as np

from bfqr.core import ConformityRecords
from bfqr.quantile_model import QuantileModel, TrainingInfo


def records_from_arrays(scores, groups, bins) -> ConformityRecords:
    """Conformity records straight from parallel arrays."""
    return ConformityRecords(
        np.asarray(scores, dtype=float),
        np.asarray(groups, dtype=int),
        np.asarray(bins, dtype=int),
        np.arange(len(scores)),
    )


def make_affine_model(lower: float, upper: float, p: int = 1) -> QuantileModel:
    """Intercept-only model for hand-computable interval tests."""
    lw = np.zeros(p + 1)
    uw = np.zeros(p + 1)
    lw[0], uw[0] = lower, upper
    return QuantileModel(
        lower_weights=lw,
        upper_weights=uw,
        levels=(0.05, 0.95),
        feature_mean=np.zeros(p),
        feature_scale=np.ones(p),
        training=TrainingInfo(0, 0.0),
    )
